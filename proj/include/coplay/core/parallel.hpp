#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace coplay {

/// Runs `n` independent jobs on up to `workers` threads; results keep job
/// order.
template <class R, class F>
std::vector<R> parallel_map(std::size_t n, int workers, F&& f) {
  std::vector<R> out(n);
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) out[i] = f(i);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace coplay
