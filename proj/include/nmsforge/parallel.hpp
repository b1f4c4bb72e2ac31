#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace nmsforge {

/// Runs fn(i) for i in [0, n). When enabled, indices are split across a small
/// thread pool; tasks must write to disjoint state. Falls back to a plain
/// loop when disabled, n < 2, or only one hardware thread exists. The first
/// exception thrown by any task is rethrown after all workers join.
inline void parallel_for(std::size_t n, bool enabled,
                         const std::function<void(std::size_t)>& fn) {
  unsigned hw = std::thread::hardware_concurrency();
  if (!enabled || n < 2 || hw < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t n_threads = std::min<std::size_t>(hw, n);
  std::vector<std::thread> workers;
  workers.reserve(n_threads);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t t = 0; t < n_threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += n_threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace nmsforge
