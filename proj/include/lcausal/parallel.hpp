#pragma once

#include <cstddef>
#include <functional>

namespace lcausal {

/// Number of worker threads used by parallel_for. Defaults to the
/// LCAUSAL_THREADS environment variable, else hardware concurrency.
unsigned thread_count();
void set_thread_count(unsigned n);

/// Calls body(i) for every i in [0, n). Work is split into contiguous
/// chunks; nested calls from inside a worker run serially. Callers that
/// need reproducible results write per-index outputs and reduce in order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace lcausal
