// Seeding and sampling. Consumers never share an engine: each one derives
// its own stream from (root seed, tag...) via splitmix64, so adding or
// reordering consumers cannot perturb unrelated draws. Gaussians come from
// the inverse CDF, making sequences identical across standard libraries.
#pragma once

#include <cstdint>
#include <random>

#include "lrgc/normal.hpp"

namespace lrgc {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag_a,
                                 std::uint64_t tag_b = 0) {
  return splitmix64(splitmix64(splitmix64(root) ^ tag_a) ^ tag_b);
}

inline Rng make_rng(std::uint64_t root, std::uint64_t tag_a = 0,
                    std::uint64_t tag_b = 0) {
  return Rng(derive_seed(root, tag_a, tag_b));
}

// Uniform on the open interval (0,1): 53 random bits centered in their
// bucket, so 0 and 1 are unreachable.
inline double uniform01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double std_normal(Rng& rng) {
  return norm_quantile(uniform01(rng));
}

// Uniform integer in [0, n): rejection over a power-of-two range, unbiased.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

}  // namespace lrgc
