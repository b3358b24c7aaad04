#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rsplab {

// Worker count for data loading / batch assembly, from RSP_LAB_WORKERS
// (default 1). Results must never depend on this value; see parallel_for.
inline int env_worker_count() {
  const char* s = std::getenv("RSP_LAB_WORKERS");
  if (!s || !*s) return 1;
  int v = std::atoi(s);
  return v < 1 ? 1 : v;
}

// Runs fn(i) for i in [0, n). fn must confine its effects to per-index
// state (e.g. slot i of a preallocated output vector) so that the result is
// identical for every worker count. The first exception thrown by any fn is
// rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (n == 0) return;
  if (workers > static_cast<int>(n)) workers = static_cast<int>(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto body = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace rsplab
