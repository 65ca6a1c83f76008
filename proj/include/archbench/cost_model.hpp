#pragma once

#include <stdexcept>

#include "archbench/search_space.hpp"

namespace archbench {

// Analytic stand-ins for parameter count and latency. Constants are arbitrary
// but frozen: golden tests, the synthetic oracle, and stratified bin edges all
// depend on them. Real deployments replace latency via the table/command
// evaluators.
inline constexpr double kUnitChannelDivisor = 256.0;
inline constexpr double kBackboneDownsampleWeight = 0.25;
inline constexpr double kHeadCost = 0.5;
inline constexpr double kLatencyBaseMs = 5.0;
inline constexpr double kLatencyMsPerCost = 2.0;

/// Feature-extraction operator weight (C2fCIB < C3k2 < C2f < C2PSA).
inline constexpr double op_weight(Op op) {
  switch (op) {
    case Op::C2f: return 1.0;
    case Op::C3k2: return 0.85;
    case Op::C2fCIB: return 0.7;
    case Op::C2PSA: return 1.3;
    default: throw std::invalid_argument("op_weight: not a feature operator");
  }
}

/// Downsample operator weight.
inline constexpr double downsample_weight(Op op) {
  switch (op) {
    case Op::Conv: return 0.25;
    case Op::SCDown: return 0.125;
    default: throw std::invalid_argument("downsample_weight: not a downsample operator");
  }
}

struct CostBreakdown {
  double backbone_cost = 0;
  double downsample_cost = 0;
  double neck_cost = 0;
  double head_cost = 0;
  double total_cost = 0;
  double latency_ms = 0;
};

namespace detail {

inline constexpr double unit(int channels) {
  const double r = channels / kUnitChannelDivisor;
  return r * r;
}

}  // namespace detail

/// Deterministic cost proxy. Backbone terms scale as depth * op-weight *
/// (ch/256)^2; the neck reuses ch_p4 for its four feature blocks and two
/// downsample blocks; the head is fixed.
inline CostBreakdown cost(const ArchConfig& c) {
  if (auto v = validate(c); !v) {
    throw std::invalid_argument("cost: invalid config: " + v.violation);
  }
  using detail::unit;
  CostBreakdown b;
  b.backbone_cost = c.d_p2 * op_weight(c.op_p2) * unit(c.ch_p2) +
                    c.d_p3 * op_weight(c.op_p3) * unit(c.ch_p3) +
                    c.d_p4 * op_weight(c.op_p4) * unit(c.ch_p4) +
                    c.d_p5 * op_weight(c.op_p5) * unit(c.ch_p5);
  b.downsample_cost = kBackboneDownsampleWeight *
                      (unit(c.ch_p2) + unit(c.ch_p3) + unit(c.ch_p4) + unit(c.ch_p5));
  b.neck_cost = 4.0 * op_weight(c.op_neck) * unit(c.ch_p4) +
                2.0 * downsample_weight(c.op_neck_down) * unit(c.ch_p4);
  b.head_cost = kHeadCost;
  b.total_cost = b.backbone_cost + b.downsample_cost + b.neck_cost + b.head_cost;
  b.latency_ms = kLatencyBaseMs + kLatencyMsPerCost * b.total_cost;
  return b;
}

inline double total_cost(const ArchConfig& c) { return cost(c).total_cost; }

inline double latency_proxy(const ArchConfig& c) { return cost(c).latency_ms; }

struct CostRange {
  double min_total_cost = 0;
  double max_total_cost = 0;
  double min_latency_ms = 0;
  double max_latency_ms = 0;
};

/// [min, max] of total_cost over the whole space, found by exhaustive sweep
/// and cached for the process lifetime (stratified bin edges depend on it).
inline const CostRange& cost_range() {
  static const CostRange range = [] {
    CostRange r;
    double lo = 1e300, hi = -1e300;
    const std::uint64_t n = cardinality();
    for (std::uint64_t i = 0; i < n; ++i) {
      const double t = cost(config_from_index(i)).total_cost;
      if (t < lo) lo = t;
      if (t > hi) hi = t;
    }
    r.min_total_cost = lo;
    r.max_total_cost = hi;
    r.min_latency_ms = kLatencyBaseMs + kLatencyMsPerCost * lo;
    r.max_latency_ms = kLatencyBaseMs + kLatencyMsPerCost * hi;
    return r;
  }();
  return range;
}

}  // namespace archbench
