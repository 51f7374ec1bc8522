#pragma once

#include <cstddef>
#include <functional>

namespace stochlyap {

/// Worker count from the STOCHLYAP_WORKERS environment variable, else 1.
/// Throws std::invalid_argument on anything but a positive integer.
std::size_t workers_from_env();

/// Calls fn(begin, end) over contiguous chunks of [0, n) on up to `workers`
/// threads. Chunks only depend on (n, workers); callers must write results to
/// per-index slots for worker-count independent output.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace stochlyap
