#pragma once

#include <functional>

namespace cimle {

/// Number of worker threads to use when the caller does not say: the
/// hardware concurrency, at least 1.
int default_workers();

/// Run fn(0..n-1), splitting indices over up to `workers` threads. Results
/// must be written to per-index slots; the schedule is static so output is
/// independent of thread timing. workers <= 1 runs inline.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

} // namespace cimle
