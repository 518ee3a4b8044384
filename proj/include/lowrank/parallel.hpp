#pragma once

#include <cstddef>
#include <functional>

namespace lrlab {

/// Worker count from LOWRANK_WORKERS, else the hardware concurrency (>= 1).
unsigned worker_count();

/// Calls body(i) for i in [0, count) on up to `workers` threads. Each index
/// runs exactly once; the first exception thrown is rethrown after all
/// workers have joined.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  unsigned workers = worker_count());

}  // namespace lrlab
