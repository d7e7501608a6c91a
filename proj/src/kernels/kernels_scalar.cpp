#include "tadc/kernels.hpp"

#include <cmath>

namespace tadc::kernels::scalar {
namespace {

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b, float* c,
          bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        float* crow = c + i * n;
        if (!accumulate) {
            for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0f;
        }
        const float* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const float av = arow[p];
            const float* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void add(std::size_t n, const float* a, const float* b, float* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(std::size_t n, const float* a, const float* b, float* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(std::size_t n, const float* a, const float* b, float* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(std::size_t n, float alpha, const float* x, float* out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void adamw(std::size_t n, float* param, const float* grad, float* m, float* v,
           const AdamWCoeffs& c) {
    const float one_m_b1 = 1.0f - c.beta1;
    const float one_m_b2 = 1.0f - c.beta2;
    for (std::size_t i = 0; i < n; ++i) {
        const float g = grad[i];
        const float mi = c.beta1 * m[i] + one_m_b1 * g;
        const float vi = c.beta2 * v[i] + one_m_b2 * (g * g);
        m[i] = mi;
        v[i] = vi;
        const float denom = std::sqrt(vi * c.bias_corr2) + c.eps;
        const float p = param[i] * c.decay_factor;
        param[i] = p - c.lr * ((mi * c.bias_corr1) / denom);
    }
}

}  // namespace

const KernelTable kTable{gemm, add, sub, mul, axpy, scale, adamw};

}  // namespace tadc::kernels::scalar
