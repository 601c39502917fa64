#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace copt {

// Worker cap. COMPOSITE_OPT_THREADS=1 forces fully serial execution;
// unset or invalid falls back to the hardware concurrency.
inline int thread_budget() {
  if (const char* env = std::getenv("COMPOSITE_OPT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs body(i) for i in [0, n). Each index is executed exactly once, so as
// long as body(i) writes only to slot i of some pre-sized container the
// result is independent of the thread count. Reductions stay with the
// caller, which must fold the slots in a fixed left-to-right order to keep
// runs bit-reproducible.
template <class Body>
void parallel_for(int n, Body&& body) {
  if (n <= 0) return;
  const int workers = std::min(thread_budget(), n);
  if (workers <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }

  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error = nullptr;
  std::mutex error_mutex;

  // Contiguous blocks: worker k gets [k*n/workers, (k+1)*n/workers).
  for (int k = 0; k < workers; ++k) {
    const int begin = static_cast<int>(static_cast<long long>(k) * n / workers);
    const int end =
        static_cast<int>(static_cast<long long>(k + 1) * n / workers);
    pool.emplace_back([&, begin, end] {
      try {
        for (int i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace copt
