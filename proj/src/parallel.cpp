#include "eivglm/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace eivglm {

int resolve_threads(int requested) {
  if (requested >= 1) return requested;
  if (const char* env = std::getenv("EIVGLM_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) return;
  threads = std::max(1, std::min<std::int64_t>(threads, n) > 0
                            ? int(std::min<std::int64_t>(threads, n))
                            : 1);
  if (threads == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    const std::int64_t lo = n * t / threads;
    const std::int64_t hi = n * (t + 1) / threads;
    pool.emplace_back([lo, hi, t, &fn, &errors] {
      try {
        for (std::int64_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace eivglm
