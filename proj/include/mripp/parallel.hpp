#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mripp {

/// Number of workers for a job count; requested 0 means hardware threads.
inline int worker_count(int requested, std::size_t jobs) {
  const int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::max(1, std::min(n, static_cast<int>(std::max<std::size_t>(jobs, 1))));
}

/// Calls fn(k) for k in [0, count) on up to threads workers. The first
/// exception stops the remaining jobs and is rethrown with the job index.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr error;
  std::size_t failed = 0;
  auto work = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        fn(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) {
          error = std::current_exception();
          failed = k;
        }
        next = count;
      }
    }
  };
  const int n = worker_count(threads, count);
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) {
    try {
      std::rethrow_exception(error);
    } catch (const std::exception& e) {
      throw std::runtime_error("job " + std::to_string(failed) + " failed: " + e.what());
    }
  }
}

}  // namespace mripp
