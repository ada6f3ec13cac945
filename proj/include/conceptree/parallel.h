#ifndef CONCEPTREE_PARALLEL_H_
#define CONCEPTREE_PARALLEL_H_

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace conceptree {

// Splits [0, n) into contiguous blocks and runs `fn(begin, end)` for each on
// up to `num_threads` threads. Callers write into disjoint output slots, so
// results never depend on the thread count. The first exception thrown by a
// worker is rethrown on the calling thread.
template <typename Fn>
void ParallelFor(size_t n, int num_threads, Fn&& fn) {
  const size_t workers = std::min<size_t>(
      n, static_cast<size_t>(std::max(1, num_threads)));
  if (workers <= 1) {
    if (n > 0) fn(size_t{0}, n);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const size_t block = (n + workers - 1) / workers;
  for (size_t w = 0; w < workers; ++w) {
    const size_t begin = w * block;
    const size_t end = std::min(n, begin + block);
    if (begin >= end) break;
    threads.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace conceptree

#endif  // CONCEPTREE_PARALLEL_H_
