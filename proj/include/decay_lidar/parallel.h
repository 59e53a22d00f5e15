#ifndef DECAY_LIDAR_PARALLEL_H_
#define DECAY_LIDAR_PARALLEL_H_

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace decay_lidar {

// Splits [0, n) into at most `threads` contiguous blocks and runs
// `body(begin, end)` on each. Blocks depend only on (n, threads), so callers
// that write into per-index slots get results independent of scheduling.
// The first exception thrown by any block is rethrown on the caller.
template <typename Body>
void ParallelFor(std::size_t n, int threads, Body&& body) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    if (n > 0) body(std::size_t{0}, n);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = n * w / workers;
    const std::size_t end = n * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace decay_lidar

#endif  // DECAY_LIDAR_PARALLEL_H_
