#pragma once

#include <functional>

#include "mtae/common.hpp"

namespace mtae {

// Worker cap: MTAE_THREADS if set (values < 1 or unparsable are ignored with
// a warning), otherwise hardware concurrency.
int worker_count();

// Runs fn(0..n-1) across worker_count() threads. Iterations must be
// independent; the first exception thrown by any worker is rethrown on the
// calling thread once all workers have finished.
void parallel_for(i64 n, const std::function<void(i64)>& fn);

}  // namespace mtae
