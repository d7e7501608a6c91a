#pragma once

#include <cstddef>
#include <functional>

namespace tadc {

/// Worker count from the TADC_THREADS environment variable (default 1).
std::size_t thread_count();

/// Runs fn(i) for i in [0, n) on up to thread_count() threads. Work is split
/// into contiguous index ranges, so any fn whose result for index i depends only
/// on i yields identical output for every thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tadc
