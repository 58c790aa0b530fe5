#ifndef SNM_PARALLEL_HPP
#define SNM_PARALLEL_HPP

#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace snm {

/// Runs fn(i) for i in [0, n) split across `threads` workers.
///
/// Each index is processed exactly once and results must be written to
/// per-index slots by the caller; combined with per-index derived RNG seeds
/// and a sequential aggregation pass afterwards, outputs are byte-identical
/// for any worker count. threads <= 1 runs inline; threads == 0 uses the
/// hardware count.
template <typename Fn>
void parallel_for(std::int64_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) {
    threads = std::thread::hardware_concurrency();
    if (threads == 0) threads = 1;
  }
  if (threads <= 1 || n <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (static_cast<std::int64_t>(threads) > n) {
    threads = static_cast<unsigned>(n);
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::exception_ptr first_error;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        // Contiguous blocks: cheap and cache-friendly; the block layout has
        // no effect on results because slots are per-index.
        std::int64_t lo = n * w / threads;
        std::int64_t hi = n * (w + 1) / threads;
        for (std::int64_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace snm

#endif  // SNM_PARALLEL_HPP
