#ifndef PCACOMP_PARALLEL_HPP
#define PCACOMP_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pcacomp {

namespace detail {
inline int& thread_setting() {
  static int threads = 1;
  return threads;
}
}  // namespace detail

/// Number of worker threads used by block-parallel kernels. Results never depend on it.
inline int num_threads() { return detail::thread_setting(); }

inline void set_num_threads(int threads) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  detail::thread_setting() = threads;
}

/// Runs body(block) for block in [0, num_blocks). Callers write into per-block
/// slots and merge them in block order, so the partition (not the thread count)
/// fixes the arithmetic.
template <typename Body>
void parallel_for_blocks(std::size_t num_blocks, Body&& body) {
  const auto workers = std::min<std::size_t>(num_blocks, static_cast<std::size_t>(num_threads()));
  if (workers <= 1) {
    for (std::size_t b = 0; b < num_blocks; ++b) body(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t b = next++; b < num_blocks; b = next++) {
        try {
          body(b);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace pcacomp

#endif
