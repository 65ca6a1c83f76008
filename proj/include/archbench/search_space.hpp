#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "archbench/common.hpp"
#include "archbench/rng.hpp"

namespace archbench {

// Block operators are categorical labels here; they carry cost-model weights,
// not neural modules.
enum class Op : std::uint8_t { C2f, C3k2, C2fCIB, C2PSA, Conv, SCDown };

inline constexpr std::string_view op_name(Op op) {
  switch (op) {
    case Op::C2f: return "C2f";
    case Op::C3k2: return "C3k2";
    case Op::C2fCIB: return "C2fCIB";
    case Op::C2PSA: return "C2PSA";
    case Op::Conv: return "Conv";
    case Op::SCDown: return "SCDown";
  }
  return "?";
}

inline std::optional<Op> op_from_name(std::string_view name) {
  for (Op op : {Op::C2f, Op::C3k2, Op::C2fCIB, Op::C2PSA, Op::Conv, Op::SCDown}) {
    if (op_name(op) == name) return op;
  }
  return std::nullopt;
}

/// One point in the discrete search space: per-stage channel widths and block
/// depths for the backbone (P2..P5), per-stage backbone operators, and the two
/// global neck choices (feature blocks N1..N4, downsample blocks D1..D2).
struct ArchConfig {
  int ch_p2 = 0, ch_p3 = 0, ch_p4 = 0, ch_p5 = 0;
  int d_p2 = 0, d_p3 = 0, d_p4 = 0, d_p5 = 0;
  Op op_p2 = Op::C2f, op_p3 = Op::C2f, op_p4 = Op::C2f, op_p5 = Op::C2f;
  Op op_neck = Op::C2f;
  Op op_neck_down = Op::Conv;

  bool operator==(const ArchConfig&) const = default;
};

// Candidate palettes. ch_p4 additionally requires ch_p4 >= ch_p3.
inline constexpr std::array<int, 3> kChP2{128, 192, 256};
inline constexpr std::array<int, 5> kChP3{256, 320, 384, 448, 512};
inline constexpr std::array<int, 4> kChP4{384, 512, 640, 768};
inline constexpr std::array<int, 3> kChP5{768, 1024, 1280};
inline constexpr std::array<int, 2> kDP2{1, 2};
inline constexpr std::array<int, 3> kDP3{2, 3, 4};
inline constexpr std::array<int, 3> kDP4{2, 3, 4};
inline constexpr std::array<int, 2> kDP5{2, 3};
inline constexpr std::array<Op, 2> kOpsP2{Op::C2f, Op::C3k2};
inline constexpr std::array<Op, 2> kOpsP3{Op::C2f, Op::C3k2};
inline constexpr std::array<Op, 3> kOpsP4{Op::C2f, Op::C3k2, Op::C2fCIB};
inline constexpr std::array<Op, 4> kOpsP5{Op::C2f, Op::C3k2, Op::C2fCIB, Op::C2PSA};
inline constexpr std::array<Op, 3> kOpsNeck{Op::C2f, Op::C3k2, Op::C2fCIB};
inline constexpr std::array<Op, 2> kOpsNeckDown{Op::Conv, Op::SCDown};

// The searchable dimensions in fixed field order. Every randomized operator
// (mutation, crossover, LHS columns) walks them in this order.
inline constexpr int kDimensionCount = 14;

inline constexpr std::array<std::string_view, kDimensionCount> kDimensionNames{
    "ch_p2", "ch_p3", "ch_p4", "ch_p5", "d_p2",    "d_p3",    "d_p4",
    "d_p5",  "op_p2", "op_p3", "op_p4", "op_p5",   "op_neck", "op_neck_down"};

inline constexpr std::array<int, kDimensionCount> kDimensionSizes{
    3, 5, 4, 3, 2, 3, 3, 2, 2, 2, 3, 4, 3, 2};

namespace detail {

template <typename T, std::size_t N>
constexpr int index_in(const std::array<T, N>& palette, T v) {
  for (std::size_t i = 0; i < N; ++i) {
    if (palette[i] == v) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace detail

/// Index of the config's current value within dimension `dim`'s palette,
/// or -1 if the value is not a palette member.
inline int dim_value_index(const ArchConfig& c, int dim) {
  using detail::index_in;
  switch (dim) {
    case 0: return index_in(kChP2, c.ch_p2);
    case 1: return index_in(kChP3, c.ch_p3);
    case 2: return index_in(kChP4, c.ch_p4);
    case 3: return index_in(kChP5, c.ch_p5);
    case 4: return index_in(kDP2, c.d_p2);
    case 5: return index_in(kDP3, c.d_p3);
    case 6: return index_in(kDP4, c.d_p4);
    case 7: return index_in(kDP5, c.d_p5);
    case 8: return index_in(kOpsP2, c.op_p2);
    case 9: return index_in(kOpsP3, c.op_p3);
    case 10: return index_in(kOpsP4, c.op_p4);
    case 11: return index_in(kOpsP5, c.op_p5);
    case 12: return index_in(kOpsNeck, c.op_neck);
    case 13: return index_in(kOpsNeckDown, c.op_neck_down);
    default: throw std::out_of_range("dim_value_index: bad dimension");
  }
}

inline void dim_set(ArchConfig& c, int dim, int value_index) {
  switch (dim) {
    case 0: c.ch_p2 = kChP2[value_index]; break;
    case 1: c.ch_p3 = kChP3[value_index]; break;
    case 2: c.ch_p4 = kChP4[value_index]; break;
    case 3: c.ch_p5 = kChP5[value_index]; break;
    case 4: c.d_p2 = kDP2[value_index]; break;
    case 5: c.d_p3 = kDP3[value_index]; break;
    case 6: c.d_p4 = kDP4[value_index]; break;
    case 7: c.d_p5 = kDP5[value_index]; break;
    case 8: c.op_p2 = kOpsP2[value_index]; break;
    case 9: c.op_p3 = kOpsP3[value_index]; break;
    case 10: c.op_p4 = kOpsP4[value_index]; break;
    case 11: c.op_p5 = kOpsP5[value_index]; break;
    case 12: c.op_neck = kOpsNeck[value_index]; break;
    case 13: c.op_neck_down = kOpsNeckDown[value_index]; break;
    default: throw std::out_of_range("dim_set: bad dimension");
  }
}

struct ValidityResult {
  bool valid = true;
  std::string violation;  // first violated constraint, in fixed field order

  explicit operator bool() const { return valid; }
};

/// Checks all palette memberships plus the ch_p4 >= ch_p3 coupling; reports
/// the first violation in field order (the relational check sits with ch_p4).
inline ValidityResult validate(const ArchConfig& c) {
  for (int dim = 0; dim < kDimensionCount; ++dim) {
    if (dim_value_index(c, dim) < 0) {
      return {false, std::string(kDimensionNames[dim]) + " not in candidate palette"};
    }
    if (dim == 2 && c.ch_p4 < c.ch_p3) {
      return {false, "ch_p4 < ch_p3"};
    }
  }
  return {true, {}};
}

namespace detail {

// Valid (ch_p3, ch_p4) palette-index pairs in lexicographic order. The pair is
// enumerated as one fused digit so the index bijection covers exactly the
// valid configs.
inline const std::vector<std::pair<int, int>>& valid_p3p4_pairs() {
  static const std::vector<std::pair<int, int>> pairs = [] {
    std::vector<std::pair<int, int>> out;
    for (int i3 = 0; i3 < static_cast<int>(kChP3.size()); ++i3) {
      for (int i4 = 0; i4 < static_cast<int>(kChP4.size()); ++i4) {
        if (kChP4[i4] >= kChP3[i3]) out.emplace_back(i3, i4);
      }
    }
    return out;
  }();
  return pairs;
}

inline int p3p4_pair_index(int i3, int i4) {
  const auto& pairs = valid_p3p4_pairs();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].first == i3 && pairs[i].second == i4) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace detail

/// Exact number of valid configs.
inline std::uint64_t cardinality() {
  std::uint64_t n = detail::valid_p3p4_pairs().size();
  n *= kChP2.size() * kChP5.size();
  n *= kDP2.size() * kDP3.size() * kDP4.size() * kDP5.size();
  n *= kOpsP2.size() * kOpsP3.size() * kOpsP4.size() * kOpsP5.size();
  n *= kOpsNeck.size() * kOpsNeckDown.size();
  return n;
}

/// Mixed-radix decode over the fixed field order (ch_p2 most significant;
/// the (ch_p3, ch_p4) pair is one fused digit over the 18 valid combinations).
inline ArchConfig config_from_index(std::uint64_t index) {
  if (index >= cardinality()) {
    throw std::out_of_range("config_from_index: index " + std::to_string(index) +
                            " >= cardinality " + std::to_string(cardinality()));
  }
  const auto& pairs = detail::valid_p3p4_pairs();
  // Digit sizes, most significant first.
  const std::uint64_t sizes[] = {kChP2.size(), pairs.size(),   kChP5.size(),
                                 kDP2.size(),  kDP3.size(),    kDP4.size(),
                                 kDP5.size(),  kOpsP2.size(),  kOpsP3.size(),
                                 kOpsP4.size(), kOpsP5.size(), kOpsNeck.size(),
                                 kOpsNeckDown.size()};
  constexpr int kDigits = 13;
  int digit[kDigits];
  for (int i = kDigits - 1; i >= 0; --i) {
    digit[i] = static_cast<int>(index % sizes[i]);
    index /= sizes[i];
  }
  ArchConfig c;
  c.ch_p2 = kChP2[digit[0]];
  c.ch_p3 = kChP3[pairs[digit[1]].first];
  c.ch_p4 = kChP4[pairs[digit[1]].second];
  c.ch_p5 = kChP5[digit[2]];
  c.d_p2 = kDP2[digit[3]];
  c.d_p3 = kDP3[digit[4]];
  c.d_p4 = kDP4[digit[5]];
  c.d_p5 = kDP5[digit[6]];
  c.op_p2 = kOpsP2[digit[7]];
  c.op_p3 = kOpsP3[digit[8]];
  c.op_p4 = kOpsP4[digit[9]];
  c.op_p5 = kOpsP5[digit[10]];
  c.op_neck = kOpsNeck[digit[11]];
  c.op_neck_down = kOpsNeckDown[digit[12]];
  return c;
}

/// Inverse of config_from_index over valid configs.
inline std::uint64_t index_of(const ArchConfig& c) {
  if (auto v = validate(c); !v) {
    throw std::invalid_argument("index_of: invalid config: " + v.violation);
  }
  const auto& pairs = detail::valid_p3p4_pairs();
  const int pair_digit = detail::p3p4_pair_index(
      detail::index_in(kChP3, c.ch_p3), detail::index_in(kChP4, c.ch_p4));
  const std::uint64_t sizes[] = {kChP2.size(), pairs.size(),   kChP5.size(),
                                 kDP2.size(),  kDP3.size(),    kDP4.size(),
                                 kDP5.size(),  kOpsP2.size(),  kOpsP3.size(),
                                 kOpsP4.size(), kOpsP5.size(), kOpsNeck.size(),
                                 kOpsNeckDown.size()};
  const int digit[] = {dim_value_index(c, 0), pair_digit,
                       dim_value_index(c, 3), dim_value_index(c, 4),
                       dim_value_index(c, 5), dim_value_index(c, 6),
                       dim_value_index(c, 7), dim_value_index(c, 8),
                       dim_value_index(c, 9), dim_value_index(c, 10),
                       dim_value_index(c, 11), dim_value_index(c, 12),
                       dim_value_index(c, 13)};
  std::uint64_t index = 0;
  for (int i = 0; i < 13; ++i) index = index * sizes[i] + digit[i];
  return index;
}

// 24-dim numeric encoding: raw channels [0..3], raw depths [4..7], then
// one-hot operator groups [8,9] [10,11] [12..14] [15..18] [19..21] [22,23].
inline constexpr int kFeatureDim = 24;
using FeatureVector = std::array<double, kFeatureDim>;

inline FeatureVector encode(const ArchConfig& c) {
  if (auto v = validate(c); !v) {
    throw std::invalid_argument("encode: invalid config: " + v.violation);
  }
  FeatureVector x{};
  x[0] = c.ch_p2;
  x[1] = c.ch_p3;
  x[2] = c.ch_p4;
  x[3] = c.ch_p5;
  x[4] = c.d_p2;
  x[5] = c.d_p3;
  x[6] = c.d_p4;
  x[7] = c.d_p5;
  int base = 8;
  for (int dim = 8; dim < kDimensionCount; ++dim) {
    x[base + dim_value_index(c, dim)] = 1.0;
    base += kDimensionSizes[dim];
  }
  return x;
}

/// Single-line key=value form in fixed field order; the canonical identity of
/// a config for hashing, database storage, and the external-command protocol.
inline std::string canonical(const ArchConfig& c) {
  std::string s;
  s.reserve(160);
  auto add_int = [&s](std::string_view key, int v) {
    if (!s.empty()) s += ',';
    s += key;
    s += '=';
    s += std::to_string(v);
  };
  auto add_op = [&s](std::string_view key, Op v) {
    s += ',';
    s += key;
    s += '=';
    s += op_name(v);
  };
  add_int("ch_p2", c.ch_p2);
  add_int("ch_p3", c.ch_p3);
  add_int("ch_p4", c.ch_p4);
  add_int("ch_p5", c.ch_p5);
  add_int("d_p2", c.d_p2);
  add_int("d_p3", c.d_p3);
  add_int("d_p4", c.d_p4);
  add_int("d_p5", c.d_p5);
  add_op("op_p2", c.op_p2);
  add_op("op_p3", c.op_p3);
  add_op("op_p4", c.op_p4);
  add_op("op_p5", c.op_p5);
  add_op("op_neck", c.op_neck);
  add_op("op_neck_down", c.op_neck_down);
  return s;
}

/// Parse the canonical key=value form. Requires all 14 keys in fixed order.
/// Throws DataError on malformed input; the result is not validity-checked.
inline ArchConfig parse_canonical(std::string_view text) {
  ArchConfig c;
  std::size_t pos = 0;
  for (int dim = 0; dim < kDimensionCount; ++dim) {
    if (dim > 0) {
      if (pos >= text.size() || text[pos] != ',') {
        throw DataError("config string: expected ',' before field " +
                        std::string(kDimensionNames[dim]));
      }
      ++pos;
    }
    const std::string_view key = kDimensionNames[dim];
    if (text.substr(pos, key.size()) != key || pos + key.size() >= text.size() ||
        text[pos + key.size()] != '=') {
      throw DataError("config string: expected '" + std::string(key) + "='");
    }
    pos += key.size() + 1;
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view value = text.substr(pos, end - pos);
    if (dim < 8) {
      int v = 0;
      for (char ch : value) {
        if (ch < '0' || ch > '9') throw DataError("config string: bad integer for " + std::string(key));
        v = v * 10 + (ch - '0');
      }
      if (value.empty()) throw DataError("config string: empty value for " + std::string(key));
      if (dim == 0) c.ch_p2 = v;
      else if (dim == 1) c.ch_p3 = v;
      else if (dim == 2) c.ch_p4 = v;
      else if (dim == 3) c.ch_p5 = v;
      else if (dim == 4) c.d_p2 = v;
      else if (dim == 5) c.d_p3 = v;
      else if (dim == 6) c.d_p4 = v;
      else c.d_p5 = v;
    } else {
      auto op = op_from_name(value);
      if (!op) throw DataError("config string: unknown operator '" + std::string(value) + "'");
      if (dim == 8) c.op_p2 = *op;
      else if (dim == 9) c.op_p3 = *op;
      else if (dim == 10) c.op_p4 = *op;
      else if (dim == 11) c.op_p5 = *op;
      else if (dim == 12) c.op_neck = *op;
      else c.op_neck_down = *op;
    }
    pos = end;
  }
  if (pos != text.size()) throw DataError("config string: trailing characters");
  return c;
}

/// Stable 64-bit record identity: FNV-1a of the canonical string.
inline std::uint64_t config_id(const ArchConfig& c) { return fnv1a64(canonical(c)); }

namespace detail {

// ch_p4 >= ch_p3 repair used by the genetic operators: resample ch_p4
// uniformly from the candidates that dominate ch_p3. Always succeeds since
// max(kChP4) >= max(kChP3).
inline void repair_p4(ArchConfig& c, Rng& rng) {
  if (c.ch_p4 >= c.ch_p3) return;
  int candidates[kChP4.size()];
  int count = 0;
  for (int v : kChP4) {
    if (v >= c.ch_p3) candidates[count++] = v;
  }
  c.ch_p4 = candidates[uniform_below(rng, count)];
}

}  // namespace detail

/// Each dimension independently resamples uniformly from its palette with
/// probability `mutation_prob`; ch_p4 validity is then repaired by resampling.
/// The input must be valid; the output always is.
inline ArchConfig mutate(const ArchConfig& config, double mutation_prob, Rng& rng) {
  ArchConfig c = config;
  for (int dim = 0; dim < kDimensionCount; ++dim) {
    if (uniform_unit(rng) < mutation_prob) {
      dim_set(c, dim, static_cast<int>(uniform_below(rng, kDimensionSizes[dim])));
    }
  }
  detail::repair_p4(c, rng);
  return c;
}

/// Each dimension is taken from `a` or `b` with probability 1/2; ch_p4 is
/// repaired as in mutate. Both parents must be valid.
inline ArchConfig uniform_crossover(const ArchConfig& a, const ArchConfig& b, Rng& rng) {
  ArchConfig c;
  for (int dim = 0; dim < kDimensionCount; ++dim) {
    const ArchConfig& src = uniform_unit(rng) < 0.5 ? a : b;
    dim_set(c, dim, dim_value_index(src, dim));
  }
  detail::repair_p4(c, rng);
  return c;
}

}  // namespace archbench
