// Acceptance suite: ten gate criteria, one pass/fail line each. Exits nonzero
// if any criterion fails. Brute-force references (exhaustive enumeration,
// O(n^2) pair counting, full-space sweeps) are computed here, independently of
// the library paths they judge.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "archbench/cost_model.hpp"
#include "archbench/database.hpp"
#include "archbench/evaluator.hpp"
#include "archbench/evolution.hpp"
#include "archbench/gbdt.hpp"
#include "archbench/metrics.hpp"
#include "archbench/sampling.hpp"
#include "archbench/search_space.hpp"
#include "archbench/self_evolve.hpp"

#ifndef ARCHBENCH_CLI_PATH
#error "ARCHBENCH_CLI_PATH must be defined"
#endif

using namespace archbench;
using Clock = std::chrono::steady_clock;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& detail) {
  if (!ok) throw CheckFailure(detail);
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- CLI driver

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  const auto r = detail::run_command(std::string(ARCHBENCH_CLI_PATH) + " " + args, "", 600.0);
  return {r.exit_code, r.out, r.err};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + p.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("archbench_acceptance_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// ----------------------------------------------------- independent oracles

// O(n^2) tau-b by direct pair counting (the reference for criterion 3).
std::optional<double> brute_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  std::uint64_t c = 0, d = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) tx++;
      else if (dy == 0.0) ty++;
      else if (dx * dy > 0.0) c++;
      else d++;
    }
  }
  const std::uint64_t f1 = c + d + tx, f2 = c + d + ty;
  if (f1 == 0 || f2 == 0) return std::nullopt;
  return static_cast<double>(static_cast<std::int64_t>(c) - static_cast<std::int64_t>(d)) /
         std::sqrt(static_cast<double>(f1) * static_cast<double>(f2));
}

// Exhaustive noise-free optimum under a latency bound.
double sweep_optimum(double latency_max) {
  double best = -1;
  const std::uint64_t n = cardinality();
  for (std::uint64_t i = 0; i < n; ++i) {
    const ArchConfig c = config_from_index(i);
    if (latency_proxy(c) > latency_max) continue;
    best = std::max(best, synthetic_map(c, 0, false));
  }
  return best;
}

// --------------------------------------------- shared pools (criteria 5..8)

// 1,000 mixed-strategy architectures (200 random + 400 stratified + 400 LHS),
// evaluated on the noisy synthetic oracle; collisions across strategies are
// deduplicated by config id.
Pool mixed_pool(std::uint64_t seed) {
  Pool pool;
  auto add_all = [&pool](const std::vector<ArchConfig>& configs, const char* source) {
    for (const ArchConfig& c : configs) {
      ArchRecord r = make_record(c, source, 0);
      if (!pool.contains(r.id)) pool.add(std::move(r));
    }
  };
  add_all(sample_random(200, derive_seed(seed, 101)), "random");
  add_all(sample_stratified(400, 8, derive_seed(seed, 102)), "stratified");
  add_all(sample_lhs(400, derive_seed(seed, 103)), "lhs");

  const Evaluator ev(EvaluatorSpec::parse("synthetic:" + std::to_string(seed)));
  std::vector<ArchConfig> configs;
  for (const ArchRecord& r : pool) configs.push_back(r.config);
  const std::vector<Evaluation> evals = evaluate_batch(ev, configs);
  Pool evaluated;
  std::size_t i = 0;
  for (const ArchRecord& r : pool) {
    ArchRecord e = r;
    e.map_50_95 = evals[i].map_50_95;
    e.latency_ms = evals[i].latency_ms;
    evaluated.add(std::move(e));
    ++i;
  }
  return evaluated;
}

std::map<std::uint64_t, Pool> g_pools;

const Pool& pool_for_seed(std::uint64_t seed) {
  auto it = g_pools.find(seed);
  if (it == g_pools.end()) it = g_pools.emplace(seed, mixed_pool(seed)).first;
  return it->second;
}

double median_latency(const Pool& pool) {
  std::vector<double> lat;
  for (const ArchRecord& r : pool) lat.push_back(*r.latency_ms);
  std::sort(lat.begin(), lat.end());
  const std::size_t n = lat.size();
  return n % 2 == 1 ? lat[n / 2] : 0.5 * (lat[n / 2 - 1] + lat[n / 2]);
}

struct ArmMetrics {
  double val_skt = 0;
  double ea_best_true_map = 0;
};

// Validation sKT of a 10-member ensemble on an 80/20 split, plus the true
// (noise-free) quality of the best config an EA finds with that arm's
// full-pool ensemble as fitness.
ArmMetrics arm_metrics(const Pool& pool, std::uint64_t seed, double target_latency) {
  auto [train, val] = split(pool, 0.2, seed);
  std::vector<FeatureVector> x;
  std::vector<double> y;
  for (const ArchRecord& r : train) {
    x.push_back(encode(r.config));
    y.push_back(*r.map_50_95);
  }
  const EnsemblePredictor metrics_model = fit_ensemble(x, y, GbdtParams{}, 0.05, seed, 10);
  std::vector<double> vy, vhat;
  for (const ArchRecord& r : val) {
    vy.push_back(*r.map_50_95);
    vhat.push_back(metrics_model.predict(encode(r.config)));
  }
  ArmMetrics m;
  const auto skt = sparse_kendall_tau(vy, vhat);
  require(skt.has_value(), "validation sKT undefined");
  m.val_skt = *skt;

  x.clear();
  y.clear();
  for (const ArchRecord& r : pool) {
    x.push_back(encode(r.config));
    y.push_back(*r.map_50_95);
  }
  const EnsemblePredictor search_model = fit_ensemble(x, y, GbdtParams{}, 0.05, seed, 10);
  EAParams ea;
  ea.seed = seed;
  const SearchResult found = ea_search(
      [&](const ArchConfig& c) { return search_model.predict(encode(c)); },
      [](const ArchConfig& c) { return latency_proxy(c); }, target_latency, ea, 5);
  require(!found.entries.empty(), "EA returned nothing");
  m.ea_best_true_map = synthetic_map(found.entries[0].config, 0, false);
  return m;
}

// ------------------------------------------------------------ criteria 1..10

void criterion_1_space_exactness() {
  const auto started = Clock::now();
  const CliResult r = run_cli("space info");
  require(r.exit_code == 0, "space info exited " + std::to_string(r.exit_code));
  require(r.out.find("\"cardinality\": 1679616") != std::string::npos,
          "space info does not report cardinality 1679616");

  const std::uint64_t n = cardinality();
  require(n == 1679616ull, "cardinality() != 1679616");
  for (std::uint64_t i = 0; i < n; ++i) {
    if (!validate(config_from_index(i)).valid) {
      throw CheckFailure("config_from_index(" + std::to_string(i) + ") is invalid");
    }
  }
  Rng rng(1);
  for (int k = 0; k < 10000; ++k) {
    const std::uint64_t i = uniform_below(rng, n);
    require(index_of(config_from_index(i)) == i,
            "round trip failed at index " + std::to_string(i));
  }
  const double secs = std::chrono::duration<double>(Clock::now() - started).count();
  require(secs < 60.0, "runtime " + fmt(secs) + "s exceeds 1 min");
}

void criterion_2_encoding() {
  static_assert(kFeatureDim == 24);
  static_assert(std::tuple_size_v<FeatureVector> == 24);
  Rng rng(2);
  const int group_start[] = {8, 10, 12, 15, 19, 22};
  const int group_size[] = {2, 2, 3, 4, 3, 2};
  for (int k = 0; k < 10000; ++k) {
    const FeatureVector x = encode(config_from_index(uniform_below(rng, cardinality())));
    for (int g = 0; g < 6; ++g) {
      double sum = 0;
      for (int j = 0; j < group_size[g]; ++j) sum += x[group_start[g] + j];
      require(sum == 1.0, "one-hot group " + std::to_string(g) + " sums to " + fmt(sum));
    }
  }
}

void criterion_3_metrics_oracle() {
  // Worked fixtures first.
  {
    const std::vector<double> y{1, 2, 3, 4}, yhat{1, 1, 2, 3};
    const auto tau = kendall_tau_b(y, yhat);
    require(tau && std::abs(*tau - 5.0 / std::sqrt(30.0)) <= 1e-12,
            "tau-b fixture != 5/sqrt(30)");
    const std::vector<double> sy{0.250, 0.260, 0.270, 0.280},
        syhat{0.2503, 0.2504, 0.272, 0.281};
    const auto skt = sparse_kendall_tau(sy, syhat);
    require(skt && std::abs(*skt - 5.0 / std::sqrt(30.0)) <= 1e-12,
            "sKT fixture != 5/sqrt(30)");
    const std::vector<double> ry{0.2, 0.3, 0.4}, ryhat{0.25, 0.3, 0.35};
    require(std::abs(r_squared(ry, ryhat) - 0.75) <= 1e-12, "r2 fixture != 0.75");
  }
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + uniform_below(rng, 199);
    std::vector<double> x(n), y(n);
    const std::uint64_t grid = trial % 2 == 0 ? 2 + uniform_below(rng, 10) : 1u << 30;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(uniform_below(rng, grid)) * 1e-3;
      y[i] = static_cast<double>(uniform_below(rng, grid)) * 1e-3;
    }
    const auto fast = kendall_tau_b(x, y);
    const auto brute = brute_tau_b(x, y);
    require(fast.has_value() == brute.has_value() && (!fast || *fast == *brute),
            "tau-b mismatch vs brute force at trial " + std::to_string(trial));

    std::vector<double> yr(n);
    for (std::size_t i = 0; i < n; ++i) yr[i] = round_to_thousandth(y[i]);
    const auto sfast = sparse_kendall_tau(x, y);
    const auto sbrute = brute_tau_b(x, yr);
    require(sfast.has_value() == sbrute.has_value() && (!sfast || *sfast == *sbrute),
            "sKT mismatch vs brute force at trial " + std::to_string(trial));
  }
}

void criterion_4_sampler_balance() {
  const auto lhs = sample_lhs(400, 4);
  require(lhs.size() == 400, "lhs returned wrong count");
  for (int dim = 0; dim < kDimensionCount; ++dim) {
    if (dim == 2) continue;  // ch_p4 is the repaired dimension
    const std::size_t k = kDimensionSizes[dim];
    std::map<int, std::size_t> counts;
    for (const ArchConfig& c : lhs) counts[dim_value_index(c, dim)]++;
    for (std::size_t v = 0; v < k; ++v) {
      const std::size_t got = counts[static_cast<int>(v)];
      require(got >= 400 / k && got <= 400 / k + (400 % k ? 1 : 0),
              std::string(kDimensionNames[dim]) + " candidate count " + std::to_string(got) +
                  " outside balance bounds");
    }
  }

  const auto strat = sample_stratified(400, 8, 4);
  require(strat.size() == 400, "stratified returned wrong count");
  const std::vector<double> edges = stratified_bin_edges(8);
  std::map<std::size_t, int> occupancy;
  for (const ArchConfig& c : strat) {
    const double t = cost(c).total_cost;
    const std::size_t b = stratified_bin_of(t, 8);
    require(t >= edges[b] && t <= edges[b + 1], "cost outside its bin's edges");
    occupancy[b]++;
  }
  for (std::size_t b = 0; b < 8; ++b) {
    require(occupancy[b] == 50,
            "bin " + std::to_string(b) + " occupancy " + std::to_string(occupancy[b]));
  }
}

void criterion_5_predictor_fidelity() {
  const auto started = Clock::now();
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Pool& pool = pool_for_seed(seed);
    auto [train, val] = split(pool, 0.2, seed);
    std::vector<FeatureVector> x;
    std::vector<double> y;
    for (const ArchRecord& r : train) {
      x.push_back(encode(r.config));
      y.push_back(*r.map_50_95);
    }
    const EnsemblePredictor model = fit_ensemble(x, y, GbdtParams{}, 0.05, seed, 10);
    std::vector<double> vy, vhat;
    for (const ArchRecord& r : val) {
      vy.push_back(*r.map_50_95);
      vhat.push_back(model.predict(encode(r.config)));
    }
    const double r2 = r_squared(vy, vhat);
    const auto skt = sparse_kendall_tau(vy, vhat);
    require(skt.has_value(), "sKT undefined for seed " + std::to_string(seed));
    std::cerr << "  [5] seed " << seed << ": pool " << pool.size() << ", val R2 " << fmt(r2)
              << ", sKT " << fmt(*skt) << '\n';
    require(*skt >= 0.60, "seed " + std::to_string(seed) + ": sKT " + fmt(*skt) + " < 0.60");
    require(r2 >= 0.70, "seed " + std::to_string(seed) + ": R2 " + fmt(r2) + " < 0.70");
  }
  const double secs = std::chrono::duration<double>(Clock::now() - started).count();
  require(secs < 120.0, "runtime " + fmt(secs) + "s exceeds 2 min");
}

void criterion_6_ea_vs_brute_force() {
  const auto started = Clock::now();
  bool cli_cross_checked = false;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Pool& pool = pool_for_seed(seed);
    const double target = median_latency(pool);
    const double optimum = sweep_optimum(target);

    if (!cli_cross_checked) {
      // The CLI referee and the in-process sweep must agree.
      std::ostringstream cmd;
      cmd.precision(17);
      cmd << "oracle best --latency-max " << target << " --oracle-seed 0 --noise off";
      const CliResult r = run_cli(cmd.str());
      require(r.exit_code == 0, "oracle best failed");
      const auto at = r.out.find("\"map_50_95\": ");
      require(at != std::string::npos, "oracle best output missing map");
      const double cli_best = std::stod(r.out.substr(at + 13));
      require(std::abs(cli_best - optimum) < 1e-12, "CLI oracle disagrees with sweep");
      cli_cross_checked = true;
    }

    EAParams ea;  // paper settings: population 50, 100 generations
    ea.seed = seed;
    const SearchResult found = ea_search(
        [](const ArchConfig& c) { return synthetic_map(c, 0, false); },
        [](const ArchConfig& c) { return latency_proxy(c); }, target, ea, 5);
    require(!found.entries.empty(), "EA returned nothing");
    const double best_true = synthetic_map(found.entries[0].config, 0, false);
    std::cerr << "  [6] seed " << seed << ": target " << fmt(target) << "ms, EA "
              << fmt(best_true) << " vs optimum " << fmt(optimum) << '\n';
    require(optimum - best_true <= 0.005,
            "seed " + std::to_string(seed) + ": gap " + fmt(optimum - best_true) + " > 0.005");
    for (const SearchEntry& e : found.entries) {
      require(e.latency_ms <= target, "EA entry violates the latency constraint");
    }
  }
  const double secs = std::chrono::duration<double>(Clock::now() - started).count();
  require(secs < 120.0, "runtime " + fmt(secs) + "s exceeds 2 min");
}

void criterion_7_self_evolve_schedule() {
  const Pool& pool = pool_for_seed(1);
  SelfEvolveConfig cfg;  // defaults: 10 rounds, 10 buckets, top 5, ensemble 10
  cfg.evaluator = EvaluatorSpec::parse("synthetic:1");
  cfg.seed = 1;
  const SelfEvolveResult result = run_self_evolve(pool, cfg);

  require(result.logs.size() == 10, "expected 10 round logs");
  std::size_t expected = pool.size();
  for (const RoundLog& log : result.logs) {
    // 50 additions per round, net of logged collisions: any shortfall must be
    // visible in the log, and the hard constraint must hold for every record.
    if (log.added_ids.size() != 50) {
      require(!log.warnings.empty() || !log.skipped_buckets.empty(),
              "round " + std::to_string(log.round) + " added " +
                  std::to_string(log.added_ids.size()) + " without logging why");
    }
    for (const std::string& w : log.warnings) {
      require(w.find("exceeds its search target") == std::string::npos,
              "round " + std::to_string(log.round) + ": a record broke its latency target");
    }
    const double round_max_target =
        *std::max_element(log.bucket_targets.begin(), log.bucket_targets.end());
    for (std::uint64_t id : log.added_ids) {
      const ArchRecord* r = result.pool.find(id);
      require(r != nullptr && r->evaluated(), "added record missing from pool");
      require(*r->latency_ms <= round_max_target + 1e-9,
              "added record exceeds its round's latency range");
      require(r->created_round == log.round, "added record has wrong round tag");
    }
    expected += log.added_ids.size();
  }
  require(result.pool.size() == expected, "pool size does not match the logged additions");
  std::cerr << "  [7] pool " << pool.size() << " -> " << result.pool.size() << " in 10 rounds\n";
  require(result.pool.size() == pool.size() + 500, "expected exactly +500 records");
}

void criterion_8_ablation_direction() {
  int skt_wins = 0, ea_wins = 0;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Pool& base = pool_for_seed(seed);
    const double target = median_latency(base);

    SelfEvolveConfig cfg;  // +200 = 4 rounds x 10 buckets x top 5
    cfg.rounds = 4;
    cfg.evaluator = EvaluatorSpec::parse("synthetic:" + std::to_string(seed));
    cfg.seed = seed;
    const SelfEvolveResult evolved = run_self_evolve(base, cfg);

    const Evaluator ev(cfg.evaluator);
    const Pool random_arm = run_random_expansion(base, evolved.pool.size() - base.size(),
                                                 ev, seed);

    const ArmMetrics self_arm = arm_metrics(evolved.pool, seed, target);
    const ArmMetrics rand_arm = arm_metrics(random_arm, seed, target);
    std::cerr << "  [8] seed " << seed << ": sKT self " << fmt(self_arm.val_skt) << " vs random "
              << fmt(rand_arm.val_skt) << "; EA best self " << fmt(self_arm.ea_best_true_map)
              << " vs random " << fmt(rand_arm.ea_best_true_map) << '\n';
    if (self_arm.val_skt > rand_arm.val_skt) ++skt_wins;
    if (self_arm.ea_best_true_map >= rand_arm.ea_best_true_map) ++ea_wins;
  }
  require(skt_wins >= 2, "self-evolve sKT won only " + std::to_string(skt_wins) + "/3 seeds");
  require(ea_wins >= 2, "self-evolve EA best won only " + std::to_string(ea_wins) + "/3 seeds");
}

void criterion_9_determinism_envelope() {
  TempDir dir("det");
  auto rerun_identical = [&](const std::string& tag, const std::string& args_template) {
    for (int run = 0; run < 2; ++run) {
      std::string args = args_template;
      std::string::size_type at;
      while ((at = args.find("{}")) != std::string::npos) {
        args.replace(at, 2, dir.file(tag + "_" + std::to_string(run)));
      }
      const CliResult r = run_cli(args);
      require(r.exit_code == 0, tag + " exited " + std::to_string(r.exit_code) + ": " + r.err);
    }
    require(slurp(dir.file(tag + "_0")) == slurp(dir.file(tag + "_1")),
            tag + " reruns are not byte-identical");
  };

  rerun_identical("rand", "sample --strategy random --n 50 --seed 3 --out {}");
  rerun_identical("strat", "sample --strategy stratified --n 48 --bins 8 --seed 3 --out {}");
  rerun_identical("lhs", "sample --strategy lhs --n 50 --seed 3 --out {}");

  const std::string db = dir.file("db.jsonl");
  require(run_cli("sample --strategy random --n 120 --seed 6 --out " + db).exit_code == 0,
          "sample failed");
  for (int run = 0; run < 2; ++run) {
    require(run_cli("evaluate --db " + db + " --evaluator synthetic:2").exit_code == 0,
            "evaluate failed");
    std::filesystem::copy_file(db, dir.file("eval_" + std::to_string(run)),
                               std::filesystem::copy_options::overwrite_existing);
  }
  require(slurp(dir.file("eval_0")) == slurp(dir.file("eval_1")),
          "evaluate reruns are not byte-identical");

  rerun_identical("merge", "db merge " + db + " " + db + " --out {}");
  rerun_identical("train",
                  "predictor train --db " + db + " --out {} --seed 2 --ensemble 2 --trees 40");
  rerun_identical("csv", "db export-csv " + db + " --out {}");
  rerun_identical("sweepcsv", "oracle sweep --oracle-seed 1 --noise off --every 200000 --out {}");

  const std::string model = dir.file("model.json");
  require(run_cli("predictor train --db " + db + " --out " + model +
                  " --seed 2 --ensemble 2 --trees 40")
                  .exit_code == 0,
          "train failed");
  rerun_identical("search", "search --model " + model +
                                " --target-latency 160 --seed 4 --top 5 --ea-population 16"
                                " --ea-generations 10 --out {}");
  rerun_identical("se", "self-evolve --db " + db +
                            " --rounds 1 --buckets 2 --top 2 --ensemble 2"
                            " --evaluator synthetic:2 --seed 5 --log {}.log --min-leaf 3"
                            " --trees 40 --ea-population 10 --ea-generations 6 --out {}");

  // Model save/load round trip predicts identically on 100 random encodings.
  const Model loaded = load_model(model);
  const Pool train_pool = load_pool(db);
  std::vector<FeatureVector> x;
  std::vector<double> y;
  for (const ArchRecord& r : train_pool) {
    x.push_back(encode(r.config));
    y.push_back(*r.map_50_95);
  }
  auto [tr, va] = split(train_pool, 0.2, 2);
  x.clear();
  y.clear();
  for (const ArchRecord& r : tr) {
    x.push_back(encode(r.config));
    y.push_back(*r.map_50_95);
  }
  GbdtParams params;
  params.n_trees = 40;
  const EnsemblePredictor refit = fit_ensemble(x, y, params, 0.05, 2, 2);
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const FeatureVector probe = encode(config_from_index(uniform_below(rng, cardinality())));
    require(model_predict(loaded, probe) == refit.predict(probe),
            "loaded model and in-process refit disagree");
  }
}

void criterion_10_command_protocol() {
  TempDir dir("proto");
  auto write_stub = [&](const std::string& name, const std::string& body) {
    const std::string path = dir.file(name);
    std::ofstream s(path);
    s << "#!/bin/sh\n" << body << '\n';
    s.close();
    std::filesystem::permissions(path, std::filesystem::perms::owner_all);
    return path;
  };
  const std::string echo_stub =
      write_stub("echo.sh", "printf '{\"map_50_95\":0.30,\"latency_ms\":20.0}'");
  const std::string fail_stub = write_stub("fail.sh", "echo trainer exploded >&2\nexit 1");
  const std::string malformed_stub =
      write_stub("malformed.sh", "printf '{\"map_50_95\":1.5,\"latency_ms\":20.0}'");
  const std::string timeout_stub = write_stub("timeout.sh", "sleep 30");

  const std::string db = dir.file("db.jsonl");
  require(run_cli("sample --strategy random --n 4 --seed 1 --out " + db).exit_code == 0,
          "sample failed");

  const CliResult ok = run_cli("evaluate --db " + db + " --evaluator cmd:" + echo_stub);
  require(ok.exit_code == 0, "echo stub: expected exit 0, got " + std::to_string(ok.exit_code));
  for (const ArchRecord& r : load_pool(db)) {
    require(r.evaluated() && *r.map_50_95 == 0.30 && *r.latency_ms == 20.0,
            "echo stub values were not stored verbatim");
  }

  const CliResult fail = run_cli("evaluate --db " + db + " --evaluator cmd:" + fail_stub);
  require(fail.exit_code == 0, "already-evaluated db should be a no-op");

  require(run_cli("sample --strategy random --n 4 --seed 2 --out " + db).exit_code == 0,
          "resample failed");
  const CliResult fail2 = run_cli("evaluate --db " + db + " --evaluator cmd:" + fail_stub);
  require(fail2.exit_code == 3, "failure stub: expected exit 3, got " +
                                    std::to_string(fail2.exit_code));
  require(fail2.err.find("trainer exploded") != std::string::npos,
          "failure stub stderr not surfaced");

  const CliResult bad = run_cli("evaluate --db " + db + " --evaluator cmd:" + malformed_stub);
  require(bad.exit_code == 3, "malformed stub: expected exit 3, got " +
                                  std::to_string(bad.exit_code));

  const CliResult slow = run_cli("evaluate --db " + db + " --evaluator cmd:" + timeout_stub +
                                 " --timeout 1");
  require(slow.exit_code == 3, "timeout stub: expected exit 3, got " +
                                   std::to_string(slow.exit_code));
  require(slow.err.find("timed out") != std::string::npos, "timeout not reported");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "space exactness (cardinality, exhaustive validity, index round trip)",
       criterion_1_space_exactness},
      {2, "24-dim encoding with exact one-hot groups", criterion_2_encoding},
      {3, "metrics match the O(n^2) brute-force oracle", criterion_3_metrics_oracle},
      {4, "LHS marginal balance and stratified occupancy at n=400", criterion_4_sampler_balance},
      {5, "predictor fidelity on the synthetic oracle (sKT >= 0.60, R2 >= 0.70)",
       criterion_5_predictor_fidelity},
      {6, "EA within 0.005 of the exhaustive optimum at median latency",
       criterion_6_ea_vs_brute_force},
      {7, "self-evolve schedule: 1,000 -> 1,500 in 10 rounds of 50",
       criterion_7_self_evolve_schedule},
      {8, "self-evolve beats random expansion (sKT and EA-best, 2 of 3 seeds)",
       criterion_8_ablation_direction},
      {9, "determinism envelope: byte-identical reruns, model round trip",
       criterion_9_determinism_envelope},
      {10, "command-protocol conformance (echo, failure, malformed, timeout)",
       criterion_10_command_protocol},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto started = Clock::now();
    std::string detail;
    bool pass = true;
    try {
      c.run();
    } catch (const std::exception& e) {
      pass = false;
      detail = e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - started).count();
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << " ["
              << fmt(secs) << "s]";
    if (!pass) {
      std::cout << " -- " << detail;
      ++failures;
    }
    std::cout << '\n' << std::flush;
  }
  if (failures > 0) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all 10 criteria passed\n";
  return 0;
}
