#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace archbench {

inline constexpr std::string_view kVersion = "1.0.0";

/// Input data violates a documented invariant (bad file, bad record, bad range).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A ground-truth evaluation could not be produced (table miss, command failure).
struct EvaluatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ceil(n * frac) guarded against FP excess (e.g. 1000 * 0.2 = 200.0000...3
// must stay 200, not 201).
inline std::size_t ceil_frac(std::size_t n, double frac) {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(n) * frac - 1e-9));
}

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

/// FNV-1a over a byte string; the stable hash used for record ids and
/// hash-derived noise.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = kFnvOffsetBasis) {
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

/// Continue an FNV-1a hash over the 8 little-endian bytes of `value`.
inline std::uint64_t fnv1a64_append(std::uint64_t h, std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    h ^= (value >> (8 * i)) & 0xffULL;
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace archbench
