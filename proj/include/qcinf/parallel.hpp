#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace qcinf {

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Workers
/// own disjoint index ranges and write to disjoint slots, so results
/// are identical for every worker count.
inline void parallel_for(long long count, int threads,
                         const std::function<void(long long)>& fn) {
  if (threads <= 1 || count < 4) {
    for (long long i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(std::min<long long>(threads, count));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (long long i = w; i < count; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

inline int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace qcinf
