#pragma once

#include <cstddef>
#include <functional>

namespace matchforge {

// Worker count from MATCHFORGE_THREADS, else hardware concurrency (>= 1).
std::size_t default_worker_count();

// Runs fn(0..n-1) over up to `workers` threads. The first exception thrown by
// any index is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t workers);

}  // namespace matchforge
