#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "archbench/cost_model.hpp"
#include "archbench/rng.hpp"
#include "archbench/search_space.hpp"

namespace archbench {

enum class SampleStrategy { random, stratified, lhs };

inline constexpr std::string_view strategy_name(SampleStrategy s) {
  switch (s) {
    case SampleStrategy::random: return "random";
    case SampleStrategy::stratified: return "stratified";
    case SampleStrategy::lhs: return "lhs";
  }
  return "?";
}

struct SamplePlan {
  SampleStrategy strategy = SampleStrategy::random;
  std::size_t n = 1;
  std::uint64_t seed = 0;
  std::size_t bins = 8;  // stratified only
};

/// n distinct configs drawn by uniform index, resampling on collision.
inline std::vector<ArchConfig> sample_random(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_random: n must be >= 1");
  const std::uint64_t card = cardinality();
  if (n > card) throw std::invalid_argument("sample_random: n exceeds space cardinality");
  Rng rng(seed);
  std::unordered_set<std::uint64_t> used;
  std::vector<ArchConfig> out;
  out.reserve(n);
  while (out.size() < n) {
    const std::uint64_t idx = uniform_below(rng, card);
    if (used.insert(idx).second) out.push_back(config_from_index(idx));
  }
  return out;
}

/// Equal-width bin edges over [min, max] of total_cost across the whole space.
inline std::vector<double> stratified_bin_edges(std::size_t bins) {
  const CostRange& range = cost_range();
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    edges[i] = range.min_total_cost +
               (range.max_total_cost - range.min_total_cost) *
                   (static_cast<double>(i) / static_cast<double>(bins));
  }
  return edges;
}

/// Bin index of a cost value; boundary values land in the upper bin, the
/// global max in the last bin.
inline std::size_t stratified_bin_of(double cost_value, std::size_t bins) {
  const CostRange& range = cost_range();
  const double span = range.max_total_cost - range.min_total_cost;
  const double t = (cost_value - range.min_total_cost) / span * static_cast<double>(bins);
  const auto b = static_cast<std::int64_t>(t);
  return static_cast<std::size_t>(std::clamp<std::int64_t>(b, 0, static_cast<std::int64_t>(bins) - 1));
}

/// Cost-stratified sampling: quotas of n/bins per bin (first n mod bins bins
/// take one extra), filled per bin by rejection over uniform random configs.
/// A bin whose quota survives 10000*quota rejections hands its shortfall to
/// the nearest other bins, with a warning.
inline std::vector<ArchConfig> sample_stratified(std::size_t n, std::size_t bins,
                                                 std::uint64_t seed,
                                                 std::vector<std::string>* warnings = nullptr) {
  if (bins < 2) throw std::invalid_argument("sample_stratified: bins must be >= 2");
  if (n < bins) throw std::invalid_argument("sample_stratified: n must be >= bins");
  const std::uint64_t card = cardinality();
  Rng rng(seed);
  std::unordered_set<std::uint64_t> used_ids;
  std::vector<std::vector<ArchConfig>> per_bin(bins);
  std::vector<std::size_t> quota(bins, n / bins);
  for (std::size_t b = 0; b < n % bins; ++b) quota[b]++;

  auto fill_bin = [&](std::size_t b, std::size_t want) {
    std::size_t rejections = 0;
    const std::size_t max_rejections = 10000 * want;
    while (per_bin[b].size() < want && rejections < max_rejections) {
      const std::uint64_t idx = uniform_below(rng, card);
      const ArchConfig c = config_from_index(idx);
      if (stratified_bin_of(cost(c).total_cost, bins) == b && !used_ids.contains(idx)) {
        used_ids.insert(idx);
        per_bin[b].push_back(c);
      } else {
        ++rejections;
      }
    }
    return per_bin[b].size();
  };

  for (std::size_t b = 0; b < bins; ++b) fill_bin(b, quota[b]);

  // Redistribute shortfalls to the nearest bins.
  for (std::size_t b = 0; b < bins; ++b) {
    if (per_bin[b].size() >= quota[b]) continue;
    std::size_t missing = quota[b] - per_bin[b].size();
    if (warnings) {
      warnings->push_back("bin " + std::to_string(b) + " short by " +
                          std::to_string(missing) + "; redistributing to neighbors");
    }
    for (std::size_t dist = 1; dist < bins && missing > 0; ++dist) {
      for (std::int64_t nb : {static_cast<std::int64_t>(b) - static_cast<std::int64_t>(dist),
                              static_cast<std::int64_t>(b) + static_cast<std::int64_t>(dist)}) {
        if (missing == 0 || nb < 0 || nb >= static_cast<std::int64_t>(bins)) continue;
        const std::size_t target = per_bin[nb].size() + missing;
        const std::size_t got = fill_bin(static_cast<std::size_t>(nb), target);
        missing = target - got;
      }
    }
  }

  std::vector<ArchConfig> out;
  out.reserve(n);
  for (auto& bucket : per_bin) {
    for (auto& c : bucket) out.push_back(c);
  }
  return out;
}

/// Latin Hypercube over the discrete dimensions: each dimension's column holds
/// every candidate floor(n/k) or ceil(n/k) times (the extras go to a seeded
/// random candidate subset), shuffled independently; rows are then repaired
/// for ch_p4 >= ch_p3 by resampling ch_p4, which is the one dimension whose
/// marginal balance the repair may break.
inline std::vector<ArchConfig> sample_lhs(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_lhs: n must be >= 1");
  Rng rng(seed);
  std::vector<std::vector<int>> columns(kDimensionCount);
  for (int dim = 0; dim < kDimensionCount; ++dim) {
    const std::size_t k = kDimensionSizes[dim];
    std::vector<std::size_t> counts(k, n / k);
    const std::size_t extra = n % k;
    if (extra > 0) {
      // Seeded random subset of candidates receives one extra copy each.
      std::vector<std::size_t> cand(k);
      std::iota(cand.begin(), cand.end(), std::size_t{0});
      for (std::size_t i = 0; i < extra; ++i) {
        const std::size_t j = i + uniform_below(rng, k - i);
        std::swap(cand[i], cand[j]);
        counts[cand[i]]++;
      }
    }
    std::vector<int>& col = columns[dim];
    col.reserve(n);
    for (std::size_t v = 0; v < k; ++v) {
      col.insert(col.end(), counts[v], static_cast<int>(v));
    }
    // Fisher-Yates with the shared stream.
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = uniform_below(rng, i);
      std::swap(col[i - 1], col[j]);
    }
  }

  std::vector<ArchConfig> out;
  out.reserve(n);
  for (std::size_t row = 0; row < n; ++row) {
    ArchConfig c;
    for (int dim = 0; dim < kDimensionCount; ++dim) {
      dim_set(c, dim, columns[dim][row]);
    }
    detail::repair_p4(c, rng);
    out.push_back(c);
  }
  return out;
}

inline std::vector<ArchConfig> sample(const SamplePlan& plan,
                                      std::vector<std::string>* warnings = nullptr) {
  switch (plan.strategy) {
    case SampleStrategy::random: return sample_random(plan.n, plan.seed);
    case SampleStrategy::stratified:
      return sample_stratified(plan.n, plan.bins, plan.seed, warnings);
    case SampleStrategy::lhs: return sample_lhs(plan.n, plan.seed);
  }
  throw std::invalid_argument("sample: unknown strategy");
}

}  // namespace archbench
