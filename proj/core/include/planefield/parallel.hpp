#pragma once

#include <functional>

namespace planefield {

/// Resolves a thread-count request. Positive counts pass through. A request
/// of 0 means "auto": the PLANEFIELD_THREADS environment variable wins if
/// set (its own 0 again meaning hardware concurrency), otherwise hardware
/// concurrency. Throws DomainError on an unparsable environment value.
int resolve_threads(int requested);

/// Runs fn(begin, end) over a partition of [0, count) across `threads`
/// workers and blocks until all chunks finish. Chunks are contiguous, so
/// per-chunk scratch state is cheap; outputs indexed by i are written by
/// exactly one worker.
void parallel_chunks(int count, int threads,
                     const std::function<void(int, int)>& fn);

}  // namespace planefield
