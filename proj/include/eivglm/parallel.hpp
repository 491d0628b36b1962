#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace eivglm {

// Resolves a thread-count request: values >= 1 pass through, anything else
// falls back to the EIVGLM_THREADS environment variable and then to the
// hardware concurrency.
int resolve_threads(int requested);

// Runs fn(i) for i in [0, n) on up to `threads` workers with a static block
// partition.  Work assignment depends only on (n, threads), never on timing,
// so callers that write to disjoint slots get identical results at any thread
// count.  The first exception (by worker index) is rethrown after all workers
// join.
void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t)>& fn);

}  // namespace eivglm
