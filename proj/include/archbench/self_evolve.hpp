#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "archbench/common.hpp"
#include "archbench/database.hpp"
#include "archbench/evaluator.hpp"
#include "archbench/evolution.hpp"
#include "archbench/gbdt.hpp"
#include "archbench/metrics.hpp"
#include "archbench/rng.hpp"

namespace archbench {

struct SelfEvolveConfig {
  int rounds = 10;
  int buckets = 10;
  int top_per_bucket = 5;
  EAParams ea;
  GbdtParams gbdt;
  double learning_rate = 0.05;
  int ensemble_members = 10;
  EvaluatorSpec evaluator;
  std::uint64_t seed = 0;
  bool freeze_buckets = false;  // keep round-1 bucket edges for all rounds
  double metrics_val_fraction = 0.2;
};

struct BucketRange {
  double lo = 0;
  double hi = 0;
};

struct RoundLog {
  int round = 0;
  std::vector<BucketRange> bucket_ranges;
  std::vector<double> bucket_targets;
  std::vector<std::uint64_t> added_ids;
  int collisions = 0;                 // ranked candidates skipped as already known
  std::vector<int> skipped_buckets;   // infeasible target, no search ran
  std::optional<double> r2;           // post-retrain validation metrics
  std::optional<double> skt;
  std::vector<std::string> warnings;
};

struct SelfEvolveResult {
  Pool pool;
  EnsemblePredictor ensemble;  // final, trained on the full pool
  std::vector<RoundLog> logs;
};

namespace detail {

// Sub-stream salts; every randomized step inside a round derives its own seed.
enum SelfEvolveSalt : std::uint64_t {
  kSaltFullFit = 1,
  kSaltMetricsSplit = 2,
  kSaltMetricsFit = 3,
  kSaltBucketTarget = 4,
  kSaltEa = 5,
  kSaltExpansion = 6,
};

inline std::uint64_t round_seed(std::uint64_t seed, std::uint64_t salt, int round,
                                int bucket = 0) {
  return derive_seed(seed, (salt << 32) ^ (static_cast<std::uint64_t>(round) << 16) ^
                               static_cast<std::uint64_t>(bucket));
}

inline void pool_training_data(const Pool& pool, std::vector<FeatureVector>* x,
                               std::vector<double>* y) {
  x->clear();
  y->clear();
  for (const ArchRecord& r : pool) {
    if (!r.evaluated()) continue;
    x->push_back(encode(r.config));
    y->push_back(*r.map_50_95);
  }
}

inline std::uint64_t pool_fingerprint(const Pool& pool) {
  std::vector<std::uint64_t> ids;
  ids.reserve(pool.size());
  for (const ArchRecord& r : pool) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  std::uint64_t h = kFnvOffsetBasis;
  for (std::uint64_t id : ids) h = fnv1a64_append(h, id);
  return h;
}

struct RoundMetrics {
  std::optional<double> r2;
  std::optional<double> skt;
};

// Seeded 80/20 split, ensemble fit on the train side, metrics on the held-out
// side. The split exists only for logging; search models train on everything.
inline RoundMetrics validation_metrics(const Pool& pool, const SelfEvolveConfig& cfg,
                                       std::uint64_t split_seed, std::uint64_t fit_seed) {
  auto [train, val] = split(pool, cfg.metrics_val_fraction, split_seed);
  std::vector<FeatureVector> x;
  std::vector<double> y;
  pool_training_data(train, &x, &y);
  const EnsemblePredictor model = fit_ensemble(x, y, cfg.gbdt, cfg.learning_rate, fit_seed,
                                               cfg.ensemble_members, pool_fingerprint(train));
  std::vector<double> vy, vhat;
  for (const ArchRecord& r : val) {
    vy.push_back(*r.map_50_95);
    vhat.push_back(model.predict(encode(r.config)));
  }
  RoundMetrics m;
  m.r2 = r_squared(vy, vhat);
  m.skt = sparse_kendall_tau(vy, vhat);
  return m;
}

}  // namespace detail

/// One self-evolve loop:
///   bucket the pool's latency range -> per bucket, draw a target latency and
///   run the EA with ensemble-predicted mAP as fitness -> evaluate the new
///   configs -> merge -> retrain and log. Deterministic given cfg.seed for
///   synthetic/table evaluators. `on_round` (optional) observes the pool after
///   each completed round, e.g. for incremental saving.
inline SelfEvolveResult run_self_evolve(
    const Pool& initial_pool, const SelfEvolveConfig& cfg,
    const std::function<void(const Pool&, const RoundLog&)>& on_round = nullptr) {
  if (cfg.rounds < 1) throw std::invalid_argument("self_evolve: rounds must be >= 1");
  if (cfg.buckets < 1) throw std::invalid_argument("self_evolve: buckets must be >= 1");
  if (cfg.top_per_bucket < 1) throw std::invalid_argument("self_evolve: top_per_bucket must be >= 1");
  if (cfg.ensemble_members < 1) throw std::invalid_argument("self_evolve: ensemble_members must be >= 1");
  for (const ArchRecord& r : initial_pool) {
    if (!r.evaluated()) {
      throw DataError("self_evolve: pool must be fully evaluated (unevaluated id " +
                      std::to_string(r.id) + ")");
    }
  }
  if (initial_pool.size() < 4 * static_cast<std::size_t>(cfg.gbdt.min_leaf)) {
    throw DataError("self_evolve: pool too small to train and validate the predictor");
  }

  const Evaluator evaluator(cfg.evaluator);
  const LatencyFn latency = [&](const ArchConfig& c) { return evaluator.search_latency(c); };

  SelfEvolveResult result;
  result.pool = initial_pool;

  std::vector<FeatureVector> x;
  std::vector<double> y;
  detail::pool_training_data(result.pool, &x, &y);
  EnsemblePredictor search_model =
      fit_ensemble(x, y, cfg.gbdt, cfg.learning_rate,
                   detail::round_seed(cfg.seed, detail::kSaltFullFit, 0),
                   cfg.ensemble_members, detail::pool_fingerprint(result.pool));

  std::vector<BucketRange> frozen_buckets;

  for (int round = 1; round <= cfg.rounds; ++round) {
    RoundLog log;
    log.round = round;

    if (cfg.freeze_buckets && !frozen_buckets.empty()) {
      log.bucket_ranges = frozen_buckets;
    } else {
      double lo = 1e300, hi = -1e300;
      for (const ArchRecord& r : result.pool) {
        lo = std::min(lo, *r.latency_ms);
        hi = std::max(hi, *r.latency_ms);
      }
      log.bucket_ranges.reserve(cfg.buckets);
      for (int b = 0; b < cfg.buckets; ++b) {
        log.bucket_ranges.push_back(
            {lo + (hi - lo) * b / cfg.buckets, lo + (hi - lo) * (b + 1) / cfg.buckets});
      }
      if (cfg.freeze_buckets) frozen_buckets = log.bucket_ranges;
    }

    // Per-bucket constrained searches against the current model.
    std::vector<ArchConfig> chosen;
    std::unordered_set<std::uint64_t> chosen_ids;
    std::vector<double> chosen_targets;
    const FitnessFn fitness = [&](const ArchConfig& c) {
      return search_model.predict(encode(c));
    };
    for (int b = 0; b < cfg.buckets; ++b) {
      const BucketRange range = log.bucket_ranges[b];
      Rng target_rng(detail::round_seed(cfg.seed, detail::kSaltBucketTarget, round, b));
      const double target = range.lo + uniform_unit(target_rng) * (range.hi - range.lo);
      log.bucket_targets.push_back(target);

      EAParams ea = cfg.ea;
      ea.seed = detail::round_seed(cfg.seed, detail::kSaltEa, round, b);
      SearchResult search;
      try {
        search = ea_search(fitness, latency, target, ea,
                           std::max(10 * cfg.top_per_bucket, 50));
      } catch (const InfeasibleTargetError&) {
        log.skipped_buckets.push_back(b);
        log.warnings.push_back("bucket " + std::to_string(b) +
                               ": no feasible config for target latency " +
                               std::to_string(target));
        continue;
      }
      int picked = 0;
      for (const SearchEntry& entry : search.entries) {
        if (picked == cfg.top_per_bucket) break;
        const std::uint64_t id = config_id(entry.config);
        if (result.pool.contains(id) || chosen_ids.contains(id)) {
          ++log.collisions;  // backfill continues down the ranked list
          continue;
        }
        chosen_ids.insert(id);
        chosen.push_back(entry.config);
        chosen_targets.push_back(target);
        ++picked;
      }
      if (picked < cfg.top_per_bucket) {
        log.warnings.push_back("bucket " + std::to_string(b) + ": only " +
                               std::to_string(picked) + " of " +
                               std::to_string(cfg.top_per_bucket) + " new configs available");
      }
    }

    // Ground truth for the round's discoveries, then merge.
    const std::vector<Evaluation> evals = evaluate_batch(evaluator, chosen);
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      ArchRecord r = make_record(chosen[i], "self_evolve_round_" + std::to_string(round), round);
      r.map_50_95 = evals[i].map_50_95;
      r.latency_ms = evals[i].latency_ms;
      if (evals[i].latency_ms > chosen_targets[i]) {
        log.warnings.push_back("id " + std::to_string(r.id) +
                               ": evaluated latency exceeds its search target");
      }
      log.added_ids.push_back(r.id);
      result.pool.add(std::move(r));
    }

    const detail::RoundMetrics metrics = detail::validation_metrics(
        result.pool, cfg, detail::round_seed(cfg.seed, detail::kSaltMetricsSplit, round),
        detail::round_seed(cfg.seed, detail::kSaltMetricsFit, round));
    log.r2 = metrics.r2;
    log.skt = metrics.skt;

    detail::pool_training_data(result.pool, &x, &y);
    search_model = fit_ensemble(x, y, cfg.gbdt, cfg.learning_rate,
                                detail::round_seed(cfg.seed, detail::kSaltFullFit, round),
                                cfg.ensemble_members, detail::pool_fingerprint(result.pool));

    result.logs.push_back(log);
    if (on_round) on_round(result.pool, result.logs.back());
  }

  result.ensemble = std::move(search_model);
  return result;
}

/// Ablation baseline: add n_add uniformly sampled, evaluated configs distinct
/// from the pool.
inline Pool run_random_expansion(const Pool& pool, std::size_t n_add,
                                 const Evaluator& evaluator, std::uint64_t seed) {
  for (const ArchRecord& r : pool) {
    if (!r.evaluated()) {
      throw DataError("random_expansion: pool must be fully evaluated");
    }
  }
  Pool out = pool;
  if (n_add == 0) return out;
  int max_round = 0;
  for (const ArchRecord& r : pool) max_round = std::max(max_round, r.created_round);

  Rng rng(derive_seed(seed, detail::kSaltExpansion));
  const std::uint64_t card = cardinality();
  std::vector<ArchConfig> chosen;
  std::unordered_set<std::uint64_t> chosen_ids;
  while (chosen.size() < n_add) {
    const ArchConfig c = config_from_index(uniform_below(rng, card));
    const std::uint64_t id = config_id(c);
    if (out.contains(id) || chosen_ids.contains(id)) continue;
    chosen_ids.insert(id);
    chosen.push_back(c);
  }
  const std::vector<Evaluation> evals = evaluate_batch(evaluator, chosen);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    ArchRecord r = make_record(chosen[i], "random", max_round + 1);
    r.map_50_95 = evals[i].map_50_95;
    r.latency_ms = evals[i].latency_ms;
    out.add(std::move(r));
  }
  return out;
}

}  // namespace archbench
