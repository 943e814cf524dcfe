#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace reflray {

// Worker count: min(hardware, REFLRAY_THREADS) with a floor of 1.
inline int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("REFLRAY_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1 && cap < n) n = cap;
  }
  return n;
}

// Runs fn(block_index, begin, end, worker_index) over fixed-size blocks of
// [0, count). Blocks are claimed dynamically but identified by index, so any
// per-block outputs can be merged in block order afterwards; results are then
// independent of scheduling and thread count.
inline void parallel_blocks(
    std::size_t count, std::size_t block_size,
    const std::function<void(std::size_t, std::size_t, std::size_t, int)>& fn) {
  if (count == 0) return;
  if (block_size == 0) block_size = 1;
  const std::size_t n_blocks = (count + block_size - 1) / block_size;
  const int n_workers =
      static_cast<int>(std::min<std::size_t>(worker_count(), n_blocks));

  if (n_workers <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) {
      fn(b, b * block_size, std::min(count, (b + 1) * block_size), 0);
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n_workers));
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < n_workers; ++w) {
    threads.emplace_back([&, w]() {
      for (;;) {
        const std::size_t b = next.fetch_add(1);
        if (b >= n_blocks) break;
        try {
          fn(b, b * block_size, std::min(count, (b + 1) * block_size), w);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          break;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace reflray
