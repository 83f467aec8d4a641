#pragma once

#include <cstddef>
#include <functional>

namespace dbr {

/// Number of worker threads used by data-parallel kernels. Initialized from
/// the DBR_THREADS environment variable (0 or unset means hardware
/// concurrency).
std::size_t num_threads();
void set_num_threads(std::size_t n);

/// Splits [0, n) into contiguous chunks and runs `fn(begin, end)` on each.
/// Every index is visited by exactly one call, so kernels that write disjoint
/// outputs stay bit-deterministic regardless of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_chunk = 1);

}  // namespace dbr
