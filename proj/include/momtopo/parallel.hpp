#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace momtopo {

/// Runs body(begin, end, worker) over contiguous chunks of [0, n). Chunking
/// depends only on n and the worker count, so results are reproducible for a
/// fixed `threads`. The first exception thrown by any worker is rethrown.
template <class Body>
void parallel_for(int n, int threads, Body&& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads <= 1) {
    if (n > 0) body(0, n, 0);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      const int begin = static_cast<int>(static_cast<long long>(n) * t / threads);
      const int end = static_cast<int>(static_cast<long long>(n) * (t + 1) / threads);
      pool.emplace_back([&, begin, end, t] {
        try {
          body(begin, end, t);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

inline int hardware_threads() {
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace momtopo
