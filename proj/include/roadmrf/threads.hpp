#ifndef ROADMRF_THREADS_HPP
#define ROADMRF_THREADS_HPP

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace roadmrf {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(0..total-1) across up to `threads` workers (strided partition).
/// Results must be written to per-index slots; the partition is static, so
/// output never depends on scheduling. The first exception is rethrown.
inline void parallel_for(int total, int threads, const std::function<void(int)>& fn) {
  threads = std::min(resolve_threads(threads), total);
  if (threads <= 1) {
    for (int i = 0; i < total; ++i) fn(i);
    return;
  }
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < total; i += threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace roadmrf

#endif  // ROADMRF_THREADS_HPP
