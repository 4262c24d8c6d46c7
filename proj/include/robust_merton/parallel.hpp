#pragma once

#include <cstddef>
#include <functional>

namespace robust_merton {

/// Worker count from ROBUST_MERTON_THREADS, else the hardware concurrency.
unsigned thread_count();

/// Calls fn(i) for i in [0, n) on up to thread_count() threads. Work is split
/// into contiguous blocks; the first exception thrown is rethrown after join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace robust_merton
