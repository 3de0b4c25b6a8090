#pragma once

// Index-parallel job runner. Jobs write into their own result slot, so the
// merged output is independent of the worker count and of scheduling.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace cespectra::cli {

/// Runs job(0..count-1) on up to `workers` threads. If jobs throw, the
/// exception of the lowest failing index is rethrown after all threads join.
inline void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_index = count;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Adapter matching the `run_cells` hooks of the experiment drivers.
inline std::function<void(std::size_t, const std::function<void(std::size_t)>&)> pool_runner(std::size_t workers) {
  return [workers](std::size_t count, const std::function<void(std::size_t)>& job) {
    parallel_for(count, workers, job);
  };
}

}  // namespace cespectra::cli
