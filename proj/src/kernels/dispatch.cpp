#include "tadc/kernels.hpp"

#include <atomic>
#include <stdexcept>
#include <string>

namespace tadc::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(TADC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend best_backend() { return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar; }

std::atomic<const KernelTable*>& active_slot() {
    static std::atomic<const KernelTable*> slot{&table(best_backend())};
    return slot;
}

std::atomic<Backend>& backend_slot() {
    static std::atomic<Backend> slot{best_backend()};
    return slot;
}

}  // namespace

std::string_view to_string(Backend backend) {
    switch (backend) {
        case Backend::Scalar:
            return "scalar";
        case Backend::Avx2:
            return "avx2";
    }
    return "unknown";
}

bool supported(Backend backend) {
    switch (backend) {
        case Backend::Scalar:
            return true;
        case Backend::Avx2:
            return cpu_has_avx2();
    }
    return false;
}

const KernelTable& table(Backend backend) {
    if (!supported(backend)) {
        throw std::runtime_error("kernel backend '" + std::string(to_string(backend)) +
                                 "' is not supported on this CPU");
    }
#if defined(TADC_HAVE_AVX2)
    if (backend == Backend::Avx2) return avx2::kTable;
#endif
    return scalar::kTable;
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

Backend active_backend() { return backend_slot().load(std::memory_order_acquire); }

void select(Backend backend) {
    const KernelTable& t = table(backend);
    active_slot().store(&t, std::memory_order_release);
    backend_slot().store(backend, std::memory_order_release);
}

}  // namespace tadc::kernels
