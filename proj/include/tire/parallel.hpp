#pragma once

#include <cstddef>
#include <functional>

namespace tire {

// Number of worker threads: TIRE_RME_THREADS if set (clamped to >= 1),
// otherwise hardware concurrency.
int worker_threads();

// Runs fn(i) for i in [0, n). Work is split into contiguous index ranges, so
// results written to per-index slots are identical regardless of schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tire
