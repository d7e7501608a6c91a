// AVX2/FMA kernels. Only gemm uses fused multiply-add; the elementwise kernels
// keep the scalar operation order so they round identically to the reference.

#include "tadc/kernels.hpp"

#include <immintrin.h>

namespace tadc::kernels::avx2 {
namespace {

template <int R>
inline void micro16(std::size_t k, const float* a, std::size_t lda, const float* b,
                    std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    __m256 acc0[R];
    __m256 acc1[R];
    for (int r = 0; r < R; ++r) {
        acc0[r] = _mm256_setzero_ps();
        acc1[r] = _mm256_setzero_ps();
    }
    for (std::size_t p = 0; p < k; ++p) {
        const __m256 b0 = _mm256_loadu_ps(b + p * ldb);
        const __m256 b1 = _mm256_loadu_ps(b + p * ldb + 8);
        for (int r = 0; r < R; ++r) {
            const __m256 av = _mm256_broadcast_ss(a + r * lda + p);
            acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
            acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
        }
    }
    for (int r = 0; r < R; ++r) {
        float* crow = c + r * ldc;
        if (accumulate) {
            acc0[r] = _mm256_add_ps(acc0[r], _mm256_loadu_ps(crow));
            acc1[r] = _mm256_add_ps(acc1[r], _mm256_loadu_ps(crow + 8));
        }
        _mm256_storeu_ps(crow, acc0[r]);
        _mm256_storeu_ps(crow + 8, acc1[r]);
    }
}

template <int R>
inline void micro8(std::size_t k, const float* a, std::size_t lda, const float* b,
                   std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    __m256 acc[R];
    for (int r = 0; r < R; ++r) acc[r] = _mm256_setzero_ps();
    for (std::size_t p = 0; p < k; ++p) {
        const __m256 b0 = _mm256_loadu_ps(b + p * ldb);
        for (int r = 0; r < R; ++r) {
            acc[r] = _mm256_fmadd_ps(_mm256_broadcast_ss(a + r * lda + p), b0, acc[r]);
        }
    }
    for (int r = 0; r < R; ++r) {
        float* crow = c + r * ldc;
        if (accumulate) acc[r] = _mm256_add_ps(acc[r], _mm256_loadu_ps(crow));
        _mm256_storeu_ps(crow, acc[r]);
    }
}

using MicroFn = void (*)(std::size_t, const float*, std::size_t, const float*, std::size_t,
                         float*, std::size_t, bool);

constexpr MicroFn kMicro16[7] = {nullptr,     micro16<1>, micro16<2>, micro16<3>,
                                 micro16<4>, micro16<5>, micro16<6>};
constexpr MicroFn kMicro8[7] = {nullptr,    micro8<1>, micro8<2>, micro8<3>,
                                micro8<4>, micro8<5>, micro8<6>};
constexpr std::size_t kRows = 6;

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
          bool accumulate) {
    std::size_t j0 = 0;
    for (; j0 + 16 <= n; j0 += 16) {
        for (std::size_t i0 = 0; i0 < m; i0 += kRows) {
            const std::size_t rows = (m - i0 < kRows) ? m - i0 : kRows;
            kMicro16[rows](k, a + i0 * k, k, b + j0, n, c + i0 * n + j0, n, accumulate);
        }
    }
    if (j0 + 8 <= n) {
        for (std::size_t i0 = 0; i0 < m; i0 += kRows) {
            const std::size_t rows = (m - i0 < kRows) ? m - i0 : kRows;
            kMicro8[rows](k, a + i0 * k, k, b + j0, n, c + i0 * n + j0, n, accumulate);
        }
        j0 += 8;
    }
    if (j0 < n) {
        for (std::size_t i = 0; i < m; ++i) {
            const float* arow = a + i * k;
            float* crow = c + i * n;
            for (std::size_t j = j0; j < n; ++j) {
                float s = 0.0f;
                for (std::size_t p = 0; p < k; ++p) s += arow[p] * b[p * n + j];
                crow[j] = accumulate ? crow[j] + s : s;
            }
        }
    }
}

void add(std::size_t n, const float* a, const float* b, float* out) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(std::size_t n, const float* a, const float* b, float* out) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(std::size_t n, const float* a, const float* b, float* out) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 prod = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(std::size_t n, float alpha, const float* x, float* out) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(out + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) out[i] = alpha * x[i];
}

void adamw(std::size_t n, float* param, const float* grad, float* m, float* v,
           const AdamWCoeffs& c) {
    const float one_m_b1 = 1.0f - c.beta1;
    const float one_m_b2 = 1.0f - c.beta2;
    const __m256 b1 = _mm256_set1_ps(c.beta1);
    const __m256 b2 = _mm256_set1_ps(c.beta2);
    const __m256 omb1 = _mm256_set1_ps(one_m_b1);
    const __m256 omb2 = _mm256_set1_ps(one_m_b2);
    const __m256 bc1 = _mm256_set1_ps(c.bias_corr1);
    const __m256 bc2 = _mm256_set1_ps(c.bias_corr2);
    const __m256 eps = _mm256_set1_ps(c.eps);
    const __m256 lr = _mm256_set1_ps(c.lr);
    const __m256 decay = _mm256_set1_ps(c.decay_factor);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 g = _mm256_loadu_ps(grad + i);
        const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)),
                                        _mm256_mul_ps(omb1, g));
        const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                        _mm256_mul_ps(omb2, _mm256_mul_ps(g, g)));
        _mm256_storeu_ps(m + i, mi);
        _mm256_storeu_ps(v + i, vi);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vi, bc2)), eps);
        const __m256 p = _mm256_mul_ps(_mm256_loadu_ps(param + i), decay);
        const __m256 step = _mm256_mul_ps(lr, _mm256_div_ps(_mm256_mul_ps(mi, bc1), denom));
        _mm256_storeu_ps(param + i, _mm256_sub_ps(p, step));
    }
    for (; i < n; ++i) {
        const float g = grad[i];
        const float mi = c.beta1 * m[i] + one_m_b1 * g;
        const float vi = c.beta2 * v[i] + one_m_b2 * (g * g);
        m[i] = mi;
        v[i] = vi;
        const float denom = __builtin_sqrtf(vi * c.bias_corr2) + c.eps;
        const float p = param[i] * c.decay_factor;
        param[i] = p - c.lr * ((mi * c.bias_corr1) / denom);
    }
}

}  // namespace

const KernelTable kTable{gemm, add, sub, mul, axpy, scale, adamw};

}  // namespace tadc::kernels::avx2
