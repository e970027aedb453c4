#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace dpoly {

/// Worker count: explicit argument > DPOLY_WORKERS env > hardware.
inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DPOLY_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? int(hw) : 1;
}

/// Runs fn(i) for i in [0, jobs). Results must be written to per-index slots;
/// the caller reduces sequentially afterwards, so output is independent of
/// the worker count.
inline void parallel_for(std::size_t jobs, int workers, const std::function<void(std::size_t)>& fn) {
  workers = resolve_workers(workers);
  if (workers <= 1 || jobs <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(workers, int(jobs));
  pool.reserve(std::size_t(n));
  for (int t = 0; t < n; ++t) pool.emplace_back(body);
  for (auto& th : pool) th.join();
}

}  // namespace dpoly
