#pragma once

#include <cstddef>
#include <functional>
#include <thread>

namespace dvgo {

/// Number of workers implied by a --threads style request (0 = hardware).
unsigned resolve_threads(unsigned requested);

/// Runs fn(worker, begin, end) over a static contiguous partition of [0, n).
/// Worker 0 runs on the calling thread. The partition depends only on
/// (n, workers), so results that merge per-worker buffers in worker order are
/// reproducible for a fixed worker count.
void parallel_for(std::size_t n, unsigned workers,
                  const std::function<void(unsigned, std::size_t, std::size_t)>& fn);

}  // namespace dvgo
