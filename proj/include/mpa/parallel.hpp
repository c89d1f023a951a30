#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace mpa {

// Contiguous-range work sharing: worker w handles [w*n/W, (w+1)*n/W).
// Callers write into preallocated per-index or per-shard slots and
// reduce in index order afterwards, so results never depend on thread
// scheduling.
inline void parallel_shards(int n, int workers, const std::function<void(int, int, int)>& fn) {
  const int w = std::max(1, std::min(workers, n));
  if (w == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(w);
  for (int s = 0; s < w; ++s) {
    const int begin = static_cast<int>(static_cast<long long>(n) * s / w);
    const int end = static_cast<int>(static_cast<long long>(n) * (s + 1) / w);
    threads.emplace_back([&fn, s, begin, end] { fn(s, begin, end); });
  }
  for (std::thread& t : threads) t.join();
}

inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  parallel_shards(n, workers, [&fn](int, int begin, int end) {
    for (int i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace mpa
