#pragma once

#include <cstdint>
#include <functional>

namespace scnn {

// Number of worker threads used by parallel_for. Defaults to the hardware
// concurrency; override with the SCNN_THREADS environment variable.
int worker_threads();

// Runs fn(i) for i in [0, n). Work is split into contiguous index chunks,
// one chunk owner per thread, so any fn that writes only to locations derived
// from its own index produces results independent of the thread count.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn, int threads = 0);

// Chunked variant: fn(begin, end) per contiguous range.
void parallel_for_chunks(int64_t n, const std::function<void(int64_t, int64_t)>& fn, int threads = 0);

} // namespace scnn
