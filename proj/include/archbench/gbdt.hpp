#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "archbench/common.hpp"
#include "archbench/rng.hpp"
#include "archbench/search_space.hpp"

namespace archbench {

struct GbdtParams {
  int n_trees = 300;
  int max_leaves = 31;
  int min_leaf = 5;
  double row_subsample = 0.8;
  double feature_subsample = 0.9;
};

inline void validate_params(const GbdtParams& p, double learning_rate) {
  if (p.n_trees < 1 || p.max_leaves < 2 || p.min_leaf < 1) {
    throw std::invalid_argument("gbdt: n_trees, max_leaves, min_leaf must be positive");
  }
  if (!(learning_rate > 0.0) || !(p.row_subsample > 0.0 && p.row_subsample <= 1.0) ||
      !(p.feature_subsample > 0.0 && p.feature_subsample <= 1.0)) {
    throw std::invalid_argument("gbdt: learning_rate and subsample fractions must be in (0, 1]");
  }
}

// Internal nodes hold (feature, threshold) with the rule x[feature] < threshold
// goes left; leaves hold (value, count). nodes[0] is the root.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  int count = 0;

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const {
    int at = 0;
    while (!nodes[at].is_leaf()) {
      at = x[nodes[at].feature] < nodes[at].threshold ? nodes[at].left : nodes[at].right;
    }
    return nodes[at].value;
  }
};

struct TrainingMeta {
  std::uint64_t pool_hash = 0;
  std::size_t train_size = 0;
};

/// One boosted-tree regressor:
///   prediction(x) = base_score + learning_rate * sum_t tree_t(x)
/// Leaf values are raw residual means; shrinkage applies at prediction time.
struct TreeEnsembleModel {
  double base_score = 0.0;
  double learning_rate = 0.05;
  GbdtParams hyperparams;
  std::uint64_t seed = 0;
  std::vector<RegressionTree> trees;
  TrainingMeta meta;

  double predict(std::span<const double> x) const {
    if (x.size() != kFeatureDim) {
      throw std::invalid_argument("predict: feature vector must have length 24");
    }
    double sum = 0.0;
    for (const RegressionTree& t : trees) sum += t.predict(x);
    return base_score + learning_rate * sum;
  }
};

/// Mean of independently seeded members (seeds seed0 .. seed0+members-1).
struct EnsemblePredictor {
  std::vector<TreeEnsembleModel> members;

  double predict(std::span<const double> x) const {
    if (members.empty()) throw std::invalid_argument("ensemble has no members");
    double sum = 0.0;
    for (const TreeEnsembleModel& m : members) sum += m.predict(x);
    return sum / static_cast<double>(members.size());
  }
};

namespace detail {

// Split finding works on per-tree value bins: for every active feature the
// subsample's distinct values are sorted once, and each row maps to its bin.
// A node's exact best split is then a count/sum accumulation over bins plus a
// scan over the bins present in that node, with thresholds at midpoints of
// consecutive present values. Ties in gain resolve to the lowest feature
// index, then the lowest threshold (features and bins are scanned ascending
// with strictly-greater acceptance).
struct TreeBuilder {
  const std::vector<FeatureVector>& x;
  const std::vector<double>& residual;
  const std::vector<std::uint32_t>& rows;    // subsampled row ids (ascending)
  const std::vector<int>& features;          // active feature ids (ascending)
  int min_leaf;

  std::vector<std::vector<double>> bin_values;       // per feature: sorted distinct
  std::vector<std::vector<std::uint16_t>> row_bins;  // per feature: bin of each local row

  struct Split {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
    std::uint16_t boundary_bin = 0;  // bins < boundary_bin go left
  };

  struct OpenLeaf {
    int node_id;
    std::vector<std::uint32_t> items;  // local row indices, order-preserving
    double sum = 0.0;
    Split best;
  };

  void build_bins() {
    bin_values.assign(features.size(), {});
    row_bins.assign(features.size(), {});
    std::vector<double> vals(rows.size());
    for (std::size_t fi = 0; fi < features.size(); ++fi) {
      const int f = features[fi];
      for (std::size_t i = 0; i < rows.size(); ++i) vals[i] = x[rows[i]][f];
      std::vector<double> uniq = vals;
      std::sort(uniq.begin(), uniq.end());
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      bin_values[fi] = uniq;
      auto& bins = row_bins[fi];
      bins.resize(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        bins[i] = static_cast<std::uint16_t>(
            std::lower_bound(uniq.begin(), uniq.end(), vals[i]) - uniq.begin());
      }
    }
  }

  Split best_split(const OpenLeaf& leaf) const {
    Split best;
    const auto n = static_cast<std::int64_t>(leaf.items.size());
    if (n < 2 * min_leaf) return best;
    const double parent_score = leaf.sum * leaf.sum / static_cast<double>(n);
    std::vector<std::int64_t> cnt;
    std::vector<double> sum;
    for (std::size_t fi = 0; fi < features.size(); ++fi) {
      const auto& uniq = bin_values[fi];
      if (uniq.size() < 2) continue;
      cnt.assign(uniq.size(), 0);
      sum.assign(uniq.size(), 0.0);
      const auto& bins = row_bins[fi];
      for (std::uint32_t item : leaf.items) {
        cnt[bins[item]] += 1;
        sum[bins[item]] += residual[rows[item]];
      }
      std::int64_t left_n = 0;
      double left_sum = 0.0;
      int prev_present = -1;
      for (std::size_t b = 0; b < uniq.size(); ++b) {
        if (cnt[b] == 0) continue;
        if (prev_present >= 0 && left_n >= min_leaf && n - left_n >= min_leaf) {
          const double right_sum = leaf.sum - left_sum;
          const double gain = left_sum * left_sum / static_cast<double>(left_n) +
                              right_sum * right_sum / static_cast<double>(n - left_n) -
                              parent_score;
          if (gain > best.gain) {
            double thr = (uniq[prev_present] + uniq[b]) / 2.0;
            if (!(thr > uniq[prev_present])) thr = uniq[b];  // midpoint rounding guard
            best.gain = gain;
            best.feature = features[fi];
            best.threshold = thr;
            best.boundary_bin = static_cast<std::uint16_t>(b);
          }
        }
        left_n += cnt[b];
        left_sum += sum[b];
        prev_present = static_cast<int>(b);
      }
    }
    return best;
  }

  RegressionTree run(int max_leaves) {
    build_bins();
    RegressionTree tree;
    std::vector<OpenLeaf> open;

    OpenLeaf root;
    root.node_id = 0;
    root.items.resize(rows.size());
    std::iota(root.items.begin(), root.items.end(), 0u);
    for (std::uint32_t item : root.items) root.sum += residual[rows[item]];
    tree.nodes.push_back(TreeNode{});
    tree.nodes[0].value = root.sum / static_cast<double>(root.items.size());
    tree.nodes[0].count = static_cast<int>(root.items.size());
    root.best = best_split(root);
    open.push_back(std::move(root));

    int leaves = 1;
    while (leaves < max_leaves) {
      // Largest positive gain wins; the earliest-created leaf wins ties.
      std::size_t pick = open.size();
      for (std::size_t i = 0; i < open.size(); ++i) {
        if (open[i].best.feature < 0 || !(open[i].best.gain > 0.0)) continue;
        if (pick == open.size() || open[i].best.gain > open[pick].best.gain) pick = i;
      }
      if (pick == open.size()) break;

      OpenLeaf leaf = std::move(open[pick]);
      open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));

      const std::size_t fi = static_cast<std::size_t>(
          std::find(features.begin(), features.end(), leaf.best.feature) - features.begin());
      OpenLeaf left, right;
      for (std::uint32_t item : leaf.items) {  // stable partition
        (row_bins[fi][item] < leaf.best.boundary_bin ? left : right).items.push_back(item);
      }
      for (std::uint32_t item : left.items) left.sum += residual[rows[item]];
      right.sum = leaf.sum - left.sum;

      left.node_id = static_cast<int>(tree.nodes.size());
      right.node_id = left.node_id + 1;
      TreeNode& parent = tree.nodes[leaf.node_id];
      parent.feature = leaf.best.feature;
      parent.threshold = leaf.best.threshold;
      parent.left = left.node_id;
      parent.right = right.node_id;
      parent.value = 0.0;
      parent.count = 0;

      for (OpenLeaf* child : {&left, &right}) {
        TreeNode node;
        node.value = child->sum / static_cast<double>(child->items.size());
        node.count = static_cast<int>(child->items.size());
        tree.nodes.push_back(node);
        child->best = best_split(*child);
      }
      open.push_back(std::move(left));
      open.push_back(std::move(right));
      ++leaves;
    }
    return tree;
  }
};

inline std::vector<std::uint32_t> subsample_rows(std::size_t n, double fraction, Rng& rng) {
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), 0u);
  if (fraction >= 1.0) return all;
  const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(
                                              static_cast<double>(n) * fraction));
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + uniform_below(rng, n - i);
    std::swap(all[i], all[j]);
  }
  all.resize(m);
  std::sort(all.begin(), all.end());
  return all;
}

inline std::vector<int> subsample_features(double fraction, Rng& rng) {
  std::vector<int> all(kFeatureDim);
  std::iota(all.begin(), all.end(), 0);
  if (fraction >= 1.0) return all;
  const auto m = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(kFeatureDim * fraction)), 1, kFeatureDim);
  if (m == kFeatureDim) return all;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + uniform_below(rng, kFeatureDim - i);
    std::swap(all[i], all[j]);
  }
  all.resize(m);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace detail

/// Least-squares gradient boosting with leaf-wise growth. Each round fits a
/// tree to the current residuals with leaf values equal to residual means;
/// with full sampling this makes training RMSE non-increasing per round.
/// Fully deterministic given (data order, params, seed).
inline TreeEnsembleModel fit(const std::vector<FeatureVector>& x,
                             const std::vector<double>& y, const GbdtParams& params,
                             double learning_rate, std::uint64_t seed,
                             std::uint64_t pool_hash = 0) {
  validate_params(params, learning_rate);
  if (x.size() != y.size()) throw std::invalid_argument("fit: x/y length mismatch");
  const std::size_t n = x.size();
  if (n < 2 * static_cast<std::size_t>(params.min_leaf)) {
    throw DataError("fit: need at least 2*min_leaf = " + std::to_string(2 * params.min_leaf) +
                    " rows, got " + std::to_string(n));
  }
  for (double v : y) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("fit: targets must lie in [0, 1]");
  }

  TreeEnsembleModel model;
  model.learning_rate = learning_rate;
  model.hyperparams = params;
  model.seed = seed;
  model.meta = {pool_hash, n};
  double mean = 0.0;
  for (double v : y) mean += v;
  model.base_score = mean / static_cast<double>(n);

  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (*lo == *hi) return model;  // constant target: base_score only

  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - model.base_score;

  Rng rng(seed);
  model.trees.reserve(params.n_trees);
  for (int t = 0; t < params.n_trees; ++t) {
    const std::vector<std::uint32_t> rows =
        detail::subsample_rows(n, params.row_subsample, rng);
    const std::vector<int> features = detail::subsample_features(params.feature_subsample, rng);
    detail::TreeBuilder builder{x, residual, rows, features, params.min_leaf, {}, {}};
    RegressionTree tree = builder.run(params.max_leaves);
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] -= learning_rate * tree.predict(x[i]);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

/// Independent fits with seeds seed0 .. seed0+members-1 on the same data.
inline EnsemblePredictor fit_ensemble(const std::vector<FeatureVector>& x,
                                      const std::vector<double>& y,
                                      const GbdtParams& params, double learning_rate,
                                      std::uint64_t seed0, int members = 10,
                                      std::uint64_t pool_hash = 0) {
  if (members < 1) throw std::invalid_argument("fit_ensemble: members must be >= 1");
  EnsemblePredictor ensemble;
  ensemble.members.resize(members);
  std::vector<std::future<TreeEnsembleModel>> jobs;
  jobs.reserve(members);
  for (int m = 0; m < members; ++m) {
    jobs.push_back(std::async(std::launch::async, [&, m] {
      return fit(x, y, params, learning_rate, seed0 + static_cast<std::uint64_t>(m), pool_hash);
    }));
  }
  for (int m = 0; m < members; ++m) ensemble.members[m] = jobs[m].get();
  return ensemble;
}

inline constexpr std::string_view kModelSchemaVersion = "1";

namespace detail {

inline json model_to_json(const TreeEnsembleModel& m) {
  json j;
  j["version"] = kModelSchemaVersion;
  j["base_score"] = m.base_score;
  j["learning_rate"] = m.learning_rate;
  j["hyperparams"] = {{"n_trees", m.hyperparams.n_trees},
                      {"max_leaves", m.hyperparams.max_leaves},
                      {"min_leaf", m.hyperparams.min_leaf},
                      {"row_subsample", m.hyperparams.row_subsample},
                      {"feature_subsample", m.hyperparams.feature_subsample},
                      {"seed", m.seed}};
  json trees = json::array();
  for (const RegressionTree& t : m.trees) {
    json nodes = json::array();
    for (const TreeNode& node : t.nodes) {
      if (node.is_leaf()) {
        nodes.push_back({{"value", node.value}, {"count", node.count}});
      } else {
        nodes.push_back({{"feature", node.feature},
                         {"threshold", node.threshold},
                         {"left", node.left},
                         {"right", node.right}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  j["trees"] = std::move(trees);
  j["training_meta"] = {{"pool_hash", m.meta.pool_hash}, {"train_size", m.meta.train_size}};
  return j;
}

inline TreeEnsembleModel model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("version")) throw DataError("model file: missing version");
  if (!j["version"].is_string() || j["version"].get<std::string>() != kModelSchemaVersion) {
    throw DataError("model file: unsupported version " + j["version"].dump());
  }
  TreeEnsembleModel m;
  m.base_score = j.at("base_score").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  const json& h = j.at("hyperparams");
  m.hyperparams.n_trees = h.at("n_trees").get<int>();
  m.hyperparams.max_leaves = h.at("max_leaves").get<int>();
  m.hyperparams.min_leaf = h.at("min_leaf").get<int>();
  m.hyperparams.row_subsample = h.at("row_subsample").get<double>();
  m.hyperparams.feature_subsample = h.at("feature_subsample").get<double>();
  m.seed = h.at("seed").get<std::uint64_t>();
  for (const json& jt : j.at("trees")) {
    RegressionTree tree;
    for (const json& jn : jt.at("nodes")) {
      TreeNode node;
      if (jn.contains("feature")) {
        node.feature = jn.at("feature").get<int>();
        node.threshold = jn.at("threshold").get<double>();
        node.left = jn.at("left").get<int>();
        node.right = jn.at("right").get<int>();
        if (node.feature < 0 || node.feature >= kFeatureDim) {
          throw DataError("model file: feature index out of range");
        }
      } else {
        node.value = jn.at("value").get<double>();
        node.count = jn.at("count").get<int>();
        if (!std::isfinite(node.value)) throw DataError("model file: non-finite leaf value");
      }
      tree.nodes.push_back(node);
    }
    if (tree.nodes.empty()) throw DataError("model file: empty tree");
    for (const TreeNode& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const auto size = static_cast<int>(tree.nodes.size());
      if (node.left < 0 || node.left >= size || node.right < 0 || node.right >= size) {
        throw DataError("model file: child index out of range");
      }
    }
    m.trees.push_back(std::move(tree));
  }
  const json& meta = j.at("training_meta");
  m.meta.pool_hash = meta.at("pool_hash").get<std::uint64_t>();
  m.meta.train_size = meta.at("train_size").get<std::size_t>();
  return m;
}

inline void write_json_atomic(const json& j, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

using Model = std::variant<TreeEnsembleModel, EnsemblePredictor>;

inline void save_model(const TreeEnsembleModel& m, const std::filesystem::path& path) {
  detail::write_json_atomic(detail::model_to_json(m), path);
}

inline void save_model(const EnsemblePredictor& e, const std::filesystem::path& path) {
  if (e.members.empty()) throw std::invalid_argument("save_model: empty ensemble");
  json j;
  j["version"] = kModelSchemaVersion;
  json members = json::array();
  for (const TreeEnsembleModel& m : e.members) members.push_back(detail::model_to_json(m));
  j["members"] = std::move(members);
  detail::write_json_atomic(j, path);
}

inline Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": parse error: " + e.what());
  }
  try {
    if (!j.is_object() || !j.contains("version")) throw DataError("missing version");
    if (!j["version"].is_string() || j["version"].get<std::string>() != kModelSchemaVersion) {
      throw DataError("unsupported version " + j["version"].dump());
    }
    if (j.contains("members")) {
      EnsemblePredictor e;
      for (const json& jm : j["members"]) e.members.push_back(detail::model_from_json(jm));
      if (e.members.empty()) throw DataError("ensemble has no members");
      return e;
    }
    return detail::model_from_json(j);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline double model_predict(const Model& model, std::span<const double> x) {
  return std::visit([&](const auto& m) { return m.predict(x); }, model);
}

}  // namespace archbench
