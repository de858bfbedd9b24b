// Deterministic data parallelism. Work over [0,n) is cut into fixed-size
// chunks; threads claim chunks through an atomic counter, and every chunk
// writes only chunk-local state. Reductions are then merged by the caller
// in chunk-index order, so results are bit-identical for any thread count.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace lrgc {

inline constexpr std::size_t kParallelChunk = 256;

// Thread-count resolution: explicit request > LRGC_THREADS > hardware.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("LRGC_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

inline std::size_t chunk_count(std::size_t n, std::size_t chunk = kParallelChunk) {
  return (n + chunk - 1) / chunk;
}

// body(chunk_index, begin, end) must touch only state owned by chunk_index.
template <class Body>
void parallel_chunks(std::size_t n, int threads, Body&& body,
                     std::size_t chunk = kParallelChunk) {
  if (n == 0) return;
  const std::size_t n_chunks = chunk_count(n, chunk);
  const int n_threads =
      static_cast<int>(std::min<std::size_t>(resolve_threads(threads), n_chunks));
  if (n_threads <= 1) {
    for (std::size_t ci = 0; ci < n_chunks; ++ci) {
      const std::size_t lo = ci * chunk;
      body(ci, lo, std::min(lo + chunk, n));
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t ci = next.fetch_add(1);
      if (ci >= n_chunks) return;
      const std::size_t lo = ci * chunk;
      body(ci, lo, std::min(lo + chunk, n));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads) - 1);
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace lrgc
