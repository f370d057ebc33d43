#ifndef DRNDALO_PARALLEL_HPP
#define DRNDALO_PARALLEL_HPP

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace drndalo {

// Runs fn(0..n-1) on a bounded worker pool. Results must be written to
// per-index slots; the call returns after all items finish. jobs == 0
// picks the hardware concurrency.
template <class F>
void parallel_for(size_t n, unsigned jobs, F&& fn) {
  if (jobs == 0) jobs = std::thread::hardware_concurrency();
  if (jobs == 0) jobs = 1;
  if (jobs > 16) jobs = 16;
  if (static_cast<size_t>(jobs) > n) jobs = static_cast<unsigned>(n);
  if (jobs <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace drndalo

#endif  // DRNDALO_PARALLEL_HPP
