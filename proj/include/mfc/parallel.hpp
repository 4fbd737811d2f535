#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace mfc {

/// Worker cap from MFC_THREADS; defaults to 1 (reproducibility over speed).
inline unsigned worker_count() {
  if (const char* env = std::getenv("MFC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

/// Index-ordered parallel loop: fn(i) must write only to slot i of its
/// output; results are therefore identical for any worker count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace mfc
