#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace meshgrow {

// Worker cap: hardware concurrency, clamped by MESHGROW_THREADS.
inline int worker_count() {
  static const int n = [] {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("MESHGROW_THREADS")) {
      const int cap = std::atoi(env);
      if (cap > 0 && cap < hw) hw = cap;
    }
    return hw;
  }();
  return n;
}

// Static block partition of [begin, end). Each index is processed by exactly
// one worker, so results are identical for any worker count.
template <typename Fn>
void parallel_for(int64_t begin, int64_t end, Fn&& fn) {
  const int64_t total = end - begin;
  const int workers = worker_count();
  if (total <= 1 || workers <= 1) {
    for (int64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  const int64_t chunk = (total + workers - 1) / workers;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    const int64_t lo = begin + w * chunk;
    const int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace meshgrow
