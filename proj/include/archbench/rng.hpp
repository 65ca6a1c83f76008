#pragma once

#include <cstdint>
#include <random>

namespace archbench {

// All randomized operations take the stream explicitly, so results are a pure
// function of (inputs, seed). std::mt19937_64 output is pinned by the
// standard; the draw helpers below avoid std::uniform_*_distribution, whose
// output is implementation-defined and would break cross-platform goldens.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// New seed for an independent sub-stream of a master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

/// Unbiased draw in [0, k). k >= 1; rejection keeps the distribution exact.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t k) {
  if (k <= 1) return 0;
  const std::uint64_t rem = (UINT64_MAX % k + 1) % k;
  const std::uint64_t limit = UINT64_MAX - rem;
  std::uint64_t x = rng();
  while (x > limit) x = rng();
  return x % k;
}

/// Uniform in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace archbench
