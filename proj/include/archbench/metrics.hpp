#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace archbench {

/// Coefficient of determination, 1 - SS_res / SS_tot about the mean of y.
/// Throws on length mismatch, n < 2, or zero variance in y.
inline double r_squared(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("r_squared: length mismatch");
  if (y.size() < 2) throw std::invalid_argument("r_squared: need at least 2 samples");
  double mean = 0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_tot = 0, ss_res = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  }
  if (ss_tot == 0.0) throw std::invalid_argument("r_squared: zero variance in y");
  return 1.0 - ss_res / ss_tot;
}

namespace detail {

// Merge sort counting strict descents (pairs i<j with v[i] > v[j]).
inline std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& scratch,
                                      std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t count = count_inversions(v, scratch, lo, mid) +
                        count_inversions(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      count += mid - i;
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + lo, scratch.begin() + hi, v.begin() + lo);
  return count;
}

inline std::uint64_t tied_pairs(std::uint64_t run) { return run * (run - 1) / 2; }

}  // namespace detail

/// Kendall tau-b in O(n log n) (sort + merge-based inversion count):
///   tau_b = (C - D) / sqrt((C + D + T_x)(C + D + T_y))
/// where T_x / T_y count pairs tied in exactly one of the lists and pairs tied
/// in both count in neither. Returns nullopt when a denominator factor is zero
/// (one list entirely tied), which has no defined value.
inline std::optional<double> kendall_tau_b(std::span<const double> x,
                                           std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("kendall_tau_b: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("kendall_tau_b: need at least 2 samples");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });

  // Tie masses over pairs: ties_x counts all pairs tied in x, ties_xy pairs
  // tied in both. Runs are contiguous after the (x, y) sort.
  std::uint64_t ties_x = 0, ties_xy = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    ties_x += detail::tied_pairs(j - i);
    for (std::size_t a = i; a < j;) {
      std::size_t b = a;
      while (b < j && y[order[b]] == y[order[a]]) ++b;  // stay within the x run
      ties_xy += detail::tied_pairs(b - a);
      a = b;
    }
    i = j;
  }

  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  std::vector<double> scratch(n);
  const std::uint64_t swaps = detail::count_inversions(ys, scratch, 0, n);

  // ys is now fully sorted; count pairs tied in y.
  std::uint64_t ties_y = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && ys[j] == ys[i]) ++j;
    ties_y += detail::tied_pairs(j - i);
    i = j;
  }

  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::int64_t concordant_minus_discordant =
      static_cast<std::int64_t>(n0) - static_cast<std::int64_t>(ties_x) -
      static_cast<std::int64_t>(ties_y) + static_cast<std::int64_t>(ties_xy) -
      2 * static_cast<std::int64_t>(swaps);
  const std::uint64_t not_tied_x = n0 - ties_x;  // = C + D + (tied only in y)
  const std::uint64_t not_tied_y = n0 - ties_y;  // = C + D + (tied only in x)
  if (not_tied_x == 0 || not_tied_y == 0) return std::nullopt;
  return static_cast<double>(concordant_minus_discordant) /
         std::sqrt(static_cast<double>(not_tied_x) * static_cast<double>(not_tied_y));
}

/// Round to the nearest 0.001, halves away from zero.
inline double round_to_thousandth(double v) {
  return std::round(v * 1000.0) / 1000.0;
}

/// Kendall tau-b after rounding the predictions (only) to 0.1% precision, so
/// rank flips within prediction noise become ties instead of discordances.
inline std::optional<double> sparse_kendall_tau(std::span<const double> y,
                                                std::span<const double> yhat) {
  if (y.size() != yhat.size()) {
    throw std::invalid_argument("sparse_kendall_tau: length mismatch");
  }
  std::vector<double> rounded(yhat.size());
  for (std::size_t i = 0; i < yhat.size(); ++i) rounded[i] = round_to_thousandth(yhat[i]);
  return kendall_tau_b(y, rounded);
}

struct MetricReport {
  double r2 = 0;
  std::optional<double> kendall_tau;
  std::optional<double> sparse_kendall_tau;
  std::size_t n = 0;
};

inline MetricReport metric_report(std::span<const double> y, std::span<const double> yhat) {
  MetricReport r;
  r.r2 = r_squared(y, yhat);
  r.kendall_tau = kendall_tau_b(y, yhat);
  r.sparse_kendall_tau = archbench::sparse_kendall_tau(y, yhat);
  r.n = y.size();
  return r;
}

}  // namespace archbench
