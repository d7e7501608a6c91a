#pragma once

// Inner-loop kernels behind the tensor ops.
//
// Every kernel has a portable scalar reference implementation. Where the CPU
// supports it, an AVX2/FMA variant is selected at runtime; the equivalence
// tests in tests/unit/kernels_test.cpp pin the two together.

#include <cstddef>
#include <string_view>

namespace tadc::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view to_string(Backend backend);

/// Coefficients for one fused AdamW update over a contiguous buffer.
struct AdamWCoeffs {
    float lr = 0.0f;
    float beta1 = 0.9f;
    float beta2 = 0.95f;
    float eps = 1e-8f;
    float decay_factor = 1.0f;  // 1 - lr * weight_decay
    float bias_corr1 = 1.0f;    // 1 / (1 - beta1^t)
    float bias_corr2 = 1.0f;    // 1 / (1 - beta2^t)
};

struct KernelTable {
    // c[m,n] (+)= a[m,k] * b[k,n]; all row-major and contiguous.
    void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b,
                 float* c, bool accumulate);
    void (*add)(std::size_t n, const float* a, const float* b, float* out);
    void (*sub)(std::size_t n, const float* a, const float* b, float* out);
    void (*mul)(std::size_t n, const float* a, const float* b, float* out);
    // y += alpha * x
    void (*axpy)(std::size_t n, float alpha, const float* x, float* y);
    // out = alpha * x
    void (*scale)(std::size_t n, float alpha, const float* x, float* out);
    // p = p*decay; m,v moment updates; p -= lr * m^ / (sqrt(v^) + eps)
    void (*adamw)(std::size_t n, float* param, const float* grad, float* m, float* v,
                  const AdamWCoeffs& c);
};

bool supported(Backend backend);

/// Kernel table for a specific backend. Throws if the backend is unsupported.
const KernelTable& table(Backend backend);

/// The table used by tensor ops. Defaults to the best supported backend.
const KernelTable& active();
Backend active_backend();

/// Override the active backend (tests, benchmarking). Throws if unsupported.
void select(Backend backend);

namespace scalar {
extern const KernelTable kTable;
}

#if defined(TADC_HAVE_AVX2)
namespace avx2 {
extern const KernelTable kTable;
}
#endif

}  // namespace tadc::kernels
