/* parallel.hpp -- a blocking parallel_for capped by VICSEK2P_THREADS */
#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vicsek2p {

inline int worker_threads() {
  int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char *env = std::getenv("VICSEK2P_THREADS")) {
    int cap = std::atoi(env);
    if (cap > 0) return std::min(hw, cap);
  }
  return hw;
}

// Calls body(begin, end) on contiguous chunks of [0, n). Runs inline when
// one thread is available or the range is small.
template <class Body>
void parallel_for(long n, Body &&body, long min_chunk = 64) {
  int threads = static_cast<int>(std::min<long>(worker_threads(), (n + min_chunk - 1) / min_chunk));
  if (threads <= 1) {
    if (n > 0) body(0L, n);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mutex;
  long chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    long b = t * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&, b, e] {
      try {
        body(b, e);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto &th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace vicsek2p
