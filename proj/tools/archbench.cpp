// Command-line front end: sampling, evaluation, database upkeep, predictor
// training, constrained search, the self-evolve loop, and the exhaustive
// synthetic-oracle referee. Every randomized command takes an explicit --seed;
// mutating commands drop a .manifest.json beside their primary output.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "archbench/common.hpp"
#include "archbench/cost_model.hpp"
#include "archbench/database.hpp"
#include "archbench/evaluator.hpp"
#include "archbench/evolution.hpp"
#include "archbench/gbdt.hpp"
#include "archbench/manifest.hpp"
#include "archbench/metrics.hpp"
#include "archbench/sampling.hpp"
#include "archbench/search_space.hpp"
#include "archbench/self_evolve.hpp"

namespace ab = archbench;
using ab::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

ab::EvaluatorSpec parse_evaluator(const std::string& text, int parallel, double timeout_sec) {
  ab::EvaluatorSpec spec;
  try {
    spec = ab::EvaluatorSpec::parse(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  spec.max_parallel = parallel;
  spec.timeout_sec = timeout_sec;
  return spec;
}

json metric_report_json(const ab::MetricReport& r) {
  json j;
  j["r2"] = r.r2;
  j["kendall_tau"] = r.kendall_tau ? json(*r.kendall_tau) : json(nullptr);
  j["skt"] = r.sparse_kendall_tau ? json(*r.sparse_kendall_tau) : json(nullptr);
  j["n"] = r.n;
  return j;
}

json dimensions_json() {
  json dims = json::array();
  auto add = [&dims](std::string_view name, const auto& palette, bool numeric) {
    json candidates = json::array();
    for (const auto& v : palette) {
      if constexpr (std::is_same_v<std::decay_t<decltype(v)>, ab::Op>) {
        candidates.push_back(std::string(ab::op_name(v)));
      } else {
        candidates.push_back(v);
      }
    }
    (void)numeric;
    dims.push_back({{"name", std::string(name)}, {"candidates", std::move(candidates)}});
  };
  add("ch_p2", ab::kChP2, true);
  add("ch_p3", ab::kChP3, true);
  add("ch_p4", ab::kChP4, true);
  add("ch_p5", ab::kChP5, true);
  add("d_p2", ab::kDP2, true);
  add("d_p3", ab::kDP3, true);
  add("d_p4", ab::kDP4, true);
  add("d_p5", ab::kDP5, true);
  add("op_p2", ab::kOpsP2, false);
  add("op_p3", ab::kOpsP3, false);
  add("op_p4", ab::kOpsP4, false);
  add("op_p5", ab::kOpsP5, false);
  add("op_neck", ab::kOpsNeck, false);
  add("op_neck_down", ab::kOpsNeckDown, false);
  return dims;
}

json cost_constants_json() {
  json j;
  j["unit_channel_divisor"] = ab::kUnitChannelDivisor;
  j["operator_weights"] = {{"C2f", ab::op_weight(ab::Op::C2f)},
                           {"C3k2", ab::op_weight(ab::Op::C3k2)},
                           {"C2fCIB", ab::op_weight(ab::Op::C2fCIB)},
                           {"C2PSA", ab::op_weight(ab::Op::C2PSA)}};
  j["downsample_weights"] = {{"Conv", ab::downsample_weight(ab::Op::Conv)},
                             {"SCDown", ab::downsample_weight(ab::Op::SCDown)}};
  j["backbone_downsample_weight"] = ab::kBackboneDownsampleWeight;
  j["head_cost"] = ab::kHeadCost;
  j["latency_base_ms"] = ab::kLatencyBaseMs;
  j["latency_ms_per_cost"] = ab::kLatencyMsPerCost;
  return j;
}

json config_json(const ab::ArchConfig& c) {
  json j;
  j["config"] = ab::canonical(c);
  j["id"] = ab::config_id(c);
  return j;
}

void pool_xy(const ab::Pool& pool, std::vector<ab::FeatureVector>* x, std::vector<double>* y) {
  for (const ab::ArchRecord& r : pool) {
    if (!r.evaluated()) continue;
    x->push_back(ab::encode(r.config));
    y->push_back(*r.map_50_95);
  }
}

// ---------------------------------------------------------------- space info

int cmd_space_info(bool with_costs) {
  json j;
  j["cardinality"] = ab::cardinality();
  j["feature_dimension"] = ab::kFeatureDim;
  j["dimensions"] = dimensions_json();
  if (with_costs) {
    const ab::CostRange& range = ab::cost_range();
    j["cost_model"] = cost_constants_json();
    j["cost_range"] = {{"min_total_cost", range.min_total_cost},
                       {"max_total_cost", range.max_total_cost},
                       {"min_latency_ms", range.min_latency_ms},
                       {"max_latency_ms", range.max_latency_ms}};
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

// -------------------------------------------------------------------- sample

int cmd_sample(const std::string& strategy, std::size_t n, std::uint64_t seed,
               std::size_t bins, const std::string& out, const std::vector<std::string>& argv) {
  ab::RunManifest manifest;
  manifest.argv = argv;
  manifest.seeds = {seed};

  ab::SamplePlan plan;
  if (strategy == "random") plan.strategy = ab::SampleStrategy::random;
  else if (strategy == "stratified") plan.strategy = ab::SampleStrategy::stratified;
  else if (strategy == "lhs") plan.strategy = ab::SampleStrategy::lhs;
  else throw UsageError("unknown strategy '" + strategy + "' (random|stratified|lhs)");
  plan.n = n;
  plan.seed = seed;
  plan.bins = bins;

  std::vector<std::string> warnings;
  const std::vector<ab::ArchConfig> configs = ab::sample(plan, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';

  ab::Pool pool;
  for (const ab::ArchConfig& c : configs) {
    pool.add(ab::make_record(c, std::string(ab::strategy_name(plan.strategy)), 0));
  }
  ab::save_pool(pool, out);
  manifest.outputs = {out};
  manifest.write(out);
  std::cerr << "wrote " << pool.size() << " records to " << out << '\n';
  return 0;
}

// ------------------------------------------------------------------ evaluate

int cmd_evaluate(const std::string& db, const std::string& evaluator_text, int parallel,
                 double timeout_sec, const std::vector<std::string>& argv) {
  ab::RunManifest manifest;
  manifest.argv = argv;
  manifest.inputs = {db};
  const ab::EvaluatorSpec spec = parse_evaluator(evaluator_text, parallel, timeout_sec);
  if (spec.kind == ab::EvaluatorKind::table) manifest.inputs.push_back(spec.table_path);
  const ab::Evaluator evaluator(spec);

  ab::Pool pool = ab::load_pool(db);
  std::vector<std::size_t> pending;
  std::vector<ab::ArchConfig> configs;
  {
    std::size_t i = 0;
    for (const ab::ArchRecord& r : pool) {
      if (!r.evaluated()) {
        pending.push_back(i);
        configs.push_back(r.config);
      }
      ++i;
    }
  }
  const std::vector<ab::Evaluation> evals = ab::evaluate_batch(evaluator, configs);
  for (std::size_t k = 0; k < pending.size(); ++k) {
    ab::ArchRecord r = pool.records()[pending[k]];
    r.map_50_95 = evals[k].map_50_95;
    r.latency_ms = evals[k].latency_ms;
    pool.replace(std::move(r));
  }
  ab::save_pool(pool, db);
  manifest.outputs = {db};
  manifest.write(db);
  std::cerr << "evaluated " << pending.size() << " records in place\n";
  return 0;
}

// ------------------------------------------------------------------------ db

int cmd_db_stats(const std::string& file) {
  const ab::Pool pool = ab::load_pool(file);
  json j;
  j["path"] = file;
  j["records"] = pool.size();
  j["evaluated"] = pool.evaluated_count();
  json by_source = json::object();
  json by_round = json::object();
  double map_min = 1e300, map_max = -1e300, map_sum = 0;
  double lat_min = 1e300, lat_max = -1e300, lat_sum = 0;
  std::size_t n_eval = 0;
  for (const ab::ArchRecord& r : pool) {
    by_source[r.source] = by_source.value(r.source, 0) + 1;
    const std::string round_key = std::to_string(r.created_round);
    by_round[round_key] = by_round.value(round_key, 0) + 1;
    if (r.evaluated()) {
      ++n_eval;
      map_min = std::min(map_min, *r.map_50_95);
      map_max = std::max(map_max, *r.map_50_95);
      map_sum += *r.map_50_95;
      lat_min = std::min(lat_min, *r.latency_ms);
      lat_max = std::max(lat_max, *r.latency_ms);
      lat_sum += *r.latency_ms;
    }
  }
  j["by_source"] = std::move(by_source);
  j["by_created_round"] = std::move(by_round);
  if (n_eval > 0) {
    j["map_50_95"] = {{"min", map_min}, {"max", map_max}, {"mean", map_sum / n_eval}};
    j["latency_ms"] = {{"min", lat_min}, {"max", lat_max}, {"mean", lat_sum / n_eval}};
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_db_merge(const std::string& a, const std::string& b, const std::string& out,
                 const std::vector<std::string>& argv) {
  ab::RunManifest manifest;
  manifest.argv = argv;
  manifest.inputs = {a, b};
  const ab::Pool merged = ab::merge(ab::load_pool(a), ab::load_pool(b));
  ab::save_pool(merged, out);
  manifest.outputs = {out};
  manifest.write(out);
  std::cerr << "merged " << merged.size() << " records into " << out << '\n';
  return 0;
}

int cmd_db_export_csv(const std::string& file, const std::string& model_path,
                      const std::string& out, const std::vector<std::string>& argv) {
  const ab::Pool pool = ab::load_pool(file);
  std::optional<ab::Model> model;
  if (!model_path.empty()) model = ab::load_model(model_path);

  std::ostringstream csv;
  csv << "id,total_cost,latency_ms,map_50_95,predicted_map,source\n";
  for (const ab::ArchRecord& r : pool) {
    csv << r.id << ',' << fmt_double(ab::cost(r.config).total_cost) << ',';
    if (r.latency_ms) csv << fmt_double(*r.latency_ms);
    csv << ',';
    if (r.map_50_95) csv << fmt_double(*r.map_50_95);
    csv << ',';
    if (model) csv << fmt_double(ab::model_predict(*model, ab::encode(r.config)));
    csv << ',' << r.source << '\n';
  }
  if (out.empty()) {
    std::cout << csv.str();
    return 0;
  }
  ab::RunManifest manifest;
  manifest.argv = argv;
  manifest.inputs = {file};
  if (!model_path.empty()) manifest.inputs.push_back(model_path);
  std::ofstream f(out, std::ios::trunc);
  if (!f) throw ab::DataError("cannot write " + out);
  f << csv.str();
  f.close();
  manifest.outputs = {out};
  manifest.write(out);
  return 0;
}

// ----------------------------------------------------------------- predictor

struct GbdtFlags {
  int trees = 300;
  double learning_rate = 0.05;
  int max_leaves = 31;
  int min_leaf = 5;
  double row_subsample = 0.8;
  double feature_subsample = 0.9;

  ab::GbdtParams params() const {
    return {trees, max_leaves, min_leaf, row_subsample, feature_subsample};
  }
};

void add_gbdt_flags(CLI::App* cmd, GbdtFlags* flags) {
  cmd->add_option("--trees", flags->trees, "Boosting rounds")->capture_default_str();
  cmd->add_option("--learning-rate", flags->learning_rate, "Shrinkage")->capture_default_str();
  cmd->add_option("--max-leaves", flags->max_leaves, "Max leaves per tree")->capture_default_str();
  cmd->add_option("--min-leaf", flags->min_leaf, "Min rows per leaf")->capture_default_str();
  cmd->add_option("--row-subsample", flags->row_subsample, "Per-tree row fraction")
      ->capture_default_str();
  cmd->add_option("--feature-subsample", flags->feature_subsample, "Per-tree feature fraction")
      ->capture_default_str();
}

int cmd_predictor_train(const std::string& db, const std::string& out, std::uint64_t seed,
                        int members, double val_split, const GbdtFlags& flags,
                        const std::vector<std::string>& argv) {
  ab::RunManifest manifest;
  manifest.argv = argv;
  manifest.seeds = {seed};
  manifest.inputs = {db};

  const ab::Pool pool = ab::load_pool(db);
  auto [train, val] = ab::split(pool, val_split, seed);
  std::vector<ab::FeatureVector> x;
  std::vector<double> y;
  pool_xy(train, &x, &y);
  const ab::EnsemblePredictor model =
      ab::fit_ensemble(x, y, flags.params(), flags.learning_rate, seed, members,
                       ab::detail::pool_fingerprint(train));

  std::vector<double> vy, vhat;
  for (const ab::ArchRecord& r : val) {
    vy.push_back(*r.map_50_95);
    vhat.push_back(model.predict(ab::encode(r.config)));
  }
  std::cout << metric_report_json(ab::metric_report(vy, vhat)).dump(2) << '\n';

  ab::save_model(model, out);
  manifest.outputs = {out};
  manifest.write(out);
  return 0;
}

int cmd_predictor_eval(const std::string& model_path, const std::string& db) {
  const ab::Model model = ab::load_model(model_path);
  const ab::Pool pool = ab::load_pool(db);
  std::vector<double> y, yhat;
  for (const ab::ArchRecord& r : pool) {
    if (!r.evaluated()) continue;
    y.push_back(*r.map_50_95);
    yhat.push_back(ab::model_predict(model, ab::encode(r.config)));
  }
  if (y.size() < 2) throw ab::DataError("predictor eval: need at least 2 evaluated records");
  std::cout << metric_report_json(ab::metric_report(y, yhat)).dump(2) << '\n';
  return 0;
}

// -------------------------------------------------------------------- search

struct EaFlags {
  int population = 50;
  int generations = 100;
  double parent_fraction = 0.25;
  double crossover_fraction = 0.5;
  double mutation_fraction = 0.5;
  double mutation_prob = 0.2;
  double elite_fraction = 0.10;

  ab::EAParams params(std::uint64_t seed) const {
    ab::EAParams p;
    p.population = population;
    p.generations = generations;
    p.parent_fraction = parent_fraction;
    p.crossover_fraction = crossover_fraction;
    p.mutation_fraction = mutation_fraction;
    p.mutation_prob = mutation_prob;
    p.elite_fraction = elite_fraction;
    p.seed = seed;
    return p;
  }
};

void add_ea_flags(CLI::App* cmd, EaFlags* flags) {
  cmd->add_option("--ea-population", flags->population, "EA population")->capture_default_str();
  cmd->add_option("--ea-generations", flags->generations, "EA generations")->capture_default_str();
  cmd->add_option("--parent-fraction", flags->parent_fraction, "Top fraction used as parents")
      ->capture_default_str();
  cmd->add_option("--crossover-fraction", flags->crossover_fraction, "Offspring via crossover")
      ->capture_default_str();
  cmd->add_option("--mutation-fraction", flags->mutation_fraction, "Offspring via mutation")
      ->capture_default_str();
  cmd->add_option("--mutation-prob", flags->mutation_prob, "Per-dimension mutation probability")
      ->capture_default_str();
  cmd->add_option("--elite-fraction", flags->elite_fraction, "Fraction preserved as elite")
      ->capture_default_str();
}

int cmd_search(const std::string& model_path, double target_latency, std::uint64_t seed,
               int top_k, const EaFlags& ea_flags, const std::string& out,
               const std::vector<std::string>& argv) {
  ab::RunManifest manifest;
  manifest.argv = argv;
  manifest.seeds = {seed};
  manifest.inputs = {model_path};

  const ab::Model model = ab::load_model(model_path);
  const ab::FitnessFn fitness = [&](const ab::ArchConfig& c) {
    return ab::model_predict(model, ab::encode(c));
  };
  const ab::LatencyFn latency = [](const ab::ArchConfig& c) { return ab::latency_proxy(c); };
  const ab::SearchResult result =
      ab::ea_search(fitness, latency, target_latency, ea_flags.params(seed), top_k);

  ab::Pool pool;
  for (const ab::SearchEntry& e : result.entries) {
    pool.add(ab::make_record(e.config, "search", 0));
  }
  ab::save_pool(pool, out);
  manifest.outputs = {out};
  manifest.write(out);

  json j;
  j["found"] = result.entries.size();
  j["distinct_evaluated"] = result.distinct_evaluated;
  j["target_latency"] = target_latency;
  json entries = json::array();
  for (const ab::SearchEntry& e : result.entries) {
    json je = config_json(e.config);
    je["predicted_map"] = e.predicted_map;
    je["latency_ms"] = e.latency_ms;
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  std::cout << j.dump(2) << '\n';
  return 0;
}

// --------------------------------------------------------------- self-evolve

json round_log_json(const ab::RoundLog& log) {
  json j;
  j["round"] = log.round;
  json ranges = json::array();
  for (const ab::BucketRange& r : log.bucket_ranges) ranges.push_back({r.lo, r.hi});
  j["bucket_ranges"] = std::move(ranges);
  j["bucket_targets"] = log.bucket_targets;
  j["added_ids"] = log.added_ids;
  j["collisions"] = log.collisions;
  j["skipped_buckets"] = log.skipped_buckets;
  j["r2"] = log.r2 ? json(*log.r2) : json(nullptr);
  j["skt"] = log.skt ? json(*log.skt) : json(nullptr);
  j["warnings"] = log.warnings;
  return j;
}

int cmd_self_evolve(const std::string& db, int rounds, int buckets, int top, int members,
                    const std::string& evaluator_text, std::uint64_t seed,
                    const std::string& out, const std::string& log_path, bool freeze_buckets,
                    int parallel, double timeout_sec, const EaFlags& ea_flags,
                    const GbdtFlags& gbdt_flags, const std::string& model_out,
                    const std::vector<std::string>& argv) {
  ab::RunManifest manifest;
  manifest.argv = argv;
  manifest.seeds = {seed};
  manifest.inputs = {db};

  ab::SelfEvolveConfig cfg;
  cfg.rounds = rounds;
  cfg.buckets = buckets;
  cfg.top_per_bucket = top;
  cfg.ea = ea_flags.params(0);
  cfg.gbdt = gbdt_flags.params();
  cfg.learning_rate = gbdt_flags.learning_rate;
  cfg.ensemble_members = members;
  cfg.evaluator = parse_evaluator(evaluator_text, parallel, timeout_sec);
  cfg.seed = seed;
  cfg.freeze_buckets = freeze_buckets;
  if (cfg.evaluator.kind == ab::EvaluatorKind::table) {
    manifest.inputs.push_back(cfg.evaluator.table_path);
  }

  const ab::Pool initial = ab::load_pool(db);
  std::ofstream log_file(log_path, std::ios::trunc);
  if (!log_file) throw ab::DataError("cannot write " + log_path);

  // Each completed round persists the pool and its log line, so an evaluator
  // failure in round k leaves round k-1 state on disk.
  auto on_round = [&](const ab::Pool& pool, const ab::RoundLog& log) {
    ab::save_pool(pool, out);
    log_file << round_log_json(log).dump() << '\n';
    log_file.flush();
    std::cerr << "round " << log.round << ": pool " << pool.size() << ", +"
              << log.added_ids.size() << " records";
    if (log.r2) std::cerr << ", r2 " << *log.r2;
    if (log.skt) std::cerr << ", skt " << *log.skt;
    std::cerr << '\n';
  };

  ab::SelfEvolveResult result;
  try {
    result = ab::run_self_evolve(initial, cfg, on_round);
  } catch (const ab::EvaluatorError&) {
    std::cerr << "evaluator failed; pool left at last completed round in " << out << '\n';
    throw;
  }

  ab::save_pool(result.pool, out);
  if (!model_out.empty()) ab::save_model(result.ensemble, model_out);

  manifest.outputs = {out, log_path};
  if (!model_out.empty()) manifest.outputs.push_back(model_out);
  manifest.write(out);

  json j;
  j["rounds"] = result.logs.size();
  j["pool_size"] = result.pool.size();
  std::size_t added = 0, collisions = 0;
  for (const ab::RoundLog& log : result.logs) {
    added += log.added_ids.size();
    collisions += static_cast<std::size_t>(log.collisions);
  }
  j["added"] = added;
  j["collisions"] = collisions;
  if (!result.logs.empty()) {
    j["final_r2"] = result.logs.back().r2 ? json(*result.logs.back().r2) : json(nullptr);
    j["final_skt"] = result.logs.back().skt ? json(*result.logs.back().skt) : json(nullptr);
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

// -------------------------------------------------------------------- oracle

bool parse_noise_flag(const std::string& text) {
  if (text == "on") return true;
  if (text == "off") return false;
  throw UsageError("--noise must be 'on' or 'off'");
}

int cmd_oracle_best(double latency_max, std::uint64_t oracle_seed, const std::string& noise) {
  const bool with_noise = parse_noise_flag(noise);
  const std::uint64_t card = ab::cardinality();
  std::uint64_t best_index = 0, feasible = 0;
  double best_map = -1e300, best_latency = 0, best_cost = 0;
  for (std::uint64_t i = 0; i < card; ++i) {
    const ab::ArchConfig c = ab::config_from_index(i);
    const ab::CostBreakdown cb = ab::cost(c);
    if (cb.latency_ms > latency_max) continue;
    ++feasible;
    const double m = ab::synthetic_map(c, oracle_seed, with_noise);
    if (m > best_map) {
      best_map = m;
      best_index = i;
      best_latency = cb.latency_ms;
      best_cost = cb.total_cost;
    }
  }
  if (feasible == 0) throw ab::DataError("oracle best: no feasible config under latency bound");
  json j = config_json(ab::config_from_index(best_index));
  j["index"] = best_index;
  j["map_50_95"] = best_map;
  j["latency_ms"] = best_latency;
  j["total_cost"] = best_cost;
  j["feasible_count"] = feasible;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_oracle_sweep(std::uint64_t oracle_seed, const std::string& noise, double latency_max,
                     std::uint64_t every, const std::string& out,
                     const std::vector<std::string>& argv) {
  if (every < 1) throw UsageError("--every must be >= 1");
  const bool with_noise = parse_noise_flag(noise);
  const std::uint64_t card = ab::cardinality();
  std::ofstream csv;
  if (!out.empty()) {
    csv.open(out, std::ios::trunc);
    if (!csv) throw ab::DataError("cannot write " + out);
    csv << "index,total_cost,latency_ms,map_50_95\n";
  }
  std::uint64_t feasible = 0, best_index = 0;
  double best_map = -1e300;
  double map_min = 1e300, map_max = -1e300;
  for (std::uint64_t i = 0; i < card; ++i) {
    const ab::ArchConfig c = ab::config_from_index(i);
    const ab::CostBreakdown cb = ab::cost(c);
    if (cb.latency_ms > latency_max) continue;
    ++feasible;
    const double m = ab::synthetic_map(c, oracle_seed, with_noise);
    if (m > best_map) {
      best_map = m;
      best_index = i;
    }
    map_min = std::min(map_min, m);
    map_max = std::max(map_max, m);
    if (csv.is_open() && (i % every) == 0) {
      csv << i << ',' << fmt_double(cb.total_cost) << ',' << fmt_double(cb.latency_ms) << ','
          << fmt_double(m) << '\n';
    }
  }
  if (feasible == 0) throw ab::DataError("oracle sweep: no feasible config under latency bound");
  json j;
  j["cardinality"] = card;
  j["feasible_count"] = feasible;
  j["map_min"] = map_min;
  j["map_max"] = map_max;
  j["best"] = config_json(ab::config_from_index(best_index));
  j["best"]["index"] = best_index;
  j["best"]["map_50_95"] = best_map;
  std::cout << j.dump(2) << '\n';
  if (!out.empty()) {
    ab::RunManifest manifest;
    manifest.argv = argv;
    manifest.seeds = {oracle_seed};
    manifest.outputs = {out};
    manifest.write(out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> argv_copy(argv, argv + argc);

  CLI::App app{"Surrogate benchmark engine for a discrete detector search space"};
  app.require_subcommand(1);

  // space
  auto* space = app.add_subcommand("space", "Search space facts");
  space->require_subcommand(1);
  auto* space_info = space->add_subcommand("info", "Cardinality, dimensions, encoding layout");
  bool with_costs = false;
  space_info->add_flag("--costs", with_costs, "Include cost model constants and cost range");

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "Draw architectures into a JSONL database");
  std::string strategy, sample_out;
  std::size_t sample_n = 1, sample_bins = 8;
  std::uint64_t sample_seed = 0;
  sample_cmd->add_option("--strategy", strategy, "random|stratified|lhs")->required();
  sample_cmd->add_option("--n", sample_n, "Number of architectures")->required();
  sample_cmd->add_option("--seed", sample_seed, "RNG seed")->required();
  sample_cmd->add_option("--bins", sample_bins, "Cost bins (stratified)")->capture_default_str();
  sample_cmd->add_option("--out", sample_out, "Output JSONL path")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Fill unevaluated records in place");
  std::string eval_db, eval_spec;
  int eval_parallel = 1;
  double eval_timeout = 300.0;
  eval_cmd->add_option("--db", eval_db, "JSONL database")->required();
  eval_cmd->add_option("--evaluator", eval_spec, "synthetic:SEED | table:PATH | cmd:\"...\"")
      ->required();
  eval_cmd->add_option("--parallel", eval_parallel, "Max concurrent commands")
      ->capture_default_str();
  eval_cmd->add_option("--timeout", eval_timeout, "Command timeout in seconds")
      ->capture_default_str();

  // db
  auto* db_cmd = app.add_subcommand("db", "Database utilities");
  db_cmd->require_subcommand(1);
  auto* db_stats = db_cmd->add_subcommand("stats", "Summary of a database file");
  std::string stats_file;
  db_stats->add_option("file", stats_file, "JSONL database")->required();
  auto* db_merge = db_cmd->add_subcommand("merge", "Union two databases by record id");
  std::string merge_a, merge_b, merge_out;
  db_merge->add_option("a", merge_a, "First database")->required();
  db_merge->add_option("b", merge_b, "Second database")->required();
  db_merge->add_option("--out", merge_out, "Output path")->required();
  auto* db_export = db_cmd->add_subcommand("export-csv", "Plot-ready CSV export");
  std::string export_file, export_model, export_out;
  db_export->add_option("file", export_file, "JSONL database")->required();
  db_export->add_option("--model", export_model, "Optional model for predicted_map column");
  db_export->add_option("--out", export_out, "Output CSV (stdout when omitted)");

  // predictor
  auto* predictor = app.add_subcommand("predictor", "Train or evaluate the surrogate");
  predictor->require_subcommand(1);
  auto* train_cmd = predictor->add_subcommand("train", "Fit an ensemble on a database");
  std::string train_db, train_out;
  std::uint64_t train_seed = 0;
  int train_members = 10;
  double train_val_split = 0.2;
  GbdtFlags train_flags;
  train_cmd->add_option("--db", train_db, "JSONL database (evaluated)")->required();
  train_cmd->add_option("--out", train_out, "Model output path")->required();
  train_cmd->add_option("--seed", train_seed, "Split seed and first member seed")->required();
  train_cmd->add_option("--ensemble", train_members, "Ensemble members")->capture_default_str();
  train_cmd->add_option("--val-split", train_val_split, "Held-out validation fraction")
      ->capture_default_str();
  add_gbdt_flags(train_cmd, &train_flags);
  auto* eval_model_cmd = predictor->add_subcommand("eval", "Metrics of a model on a database");
  std::string peval_model, peval_db;
  eval_model_cmd->add_option("--model", peval_model, "Model path")->required();
  eval_model_cmd->add_option("--db", peval_db, "JSONL database (evaluated)")->required();

  // search
  auto* search_cmd = app.add_subcommand("search", "Latency-constrained EA with model fitness");
  std::string search_model, search_out;
  double search_target = 0;
  std::uint64_t search_seed = 0;
  int search_top = 5;
  EaFlags search_ea;
  search_cmd->add_option("--model", search_model, "Model path")->required();
  search_cmd->add_option("--target-latency", search_target, "Latency bound (ms)")->required();
  search_cmd->add_option("--seed", search_seed, "RNG seed")->required();
  search_cmd->add_option("--top", search_top, "Results to keep")->capture_default_str();
  add_ea_flags(search_cmd, &search_ea);
  search_cmd->add_option("--out", search_out, "Output JSONL path")->required();

  // self-evolve
  auto* se_cmd = app.add_subcommand("self-evolve", "Bucketed search, evaluate, merge, retrain");
  std::string se_db, se_spec, se_out, se_log, se_model_out;
  int se_rounds = 10, se_buckets = 10, se_top = 5, se_members = 10, se_parallel = 1;
  std::uint64_t se_seed = 0;
  double se_timeout = 300.0;
  bool se_freeze = false;
  EaFlags se_ea;
  GbdtFlags se_gbdt;
  se_cmd->add_option("--db", se_db, "Initial pool (fully evaluated)")->required();
  se_cmd->add_option("--rounds", se_rounds, "Self-evolve rounds")->capture_default_str();
  se_cmd->add_option("--buckets", se_buckets, "Latency buckets")->capture_default_str();
  se_cmd->add_option("--top", se_top, "Kept per bucket")->capture_default_str();
  se_cmd->add_option("--ensemble", se_members, "Ensemble members")->capture_default_str();
  se_cmd->add_option("--evaluator", se_spec, "synthetic:SEED | table:PATH | cmd:\"...\"")
      ->required();
  se_cmd->add_option("--seed", se_seed, "Master seed")->required();
  se_cmd->add_option("--out", se_out, "Final pool path")->required();
  se_cmd->add_option("--log", se_log, "Round log JSONL path")->required();
  se_cmd->add_flag("--freeze-buckets", se_freeze, "Keep round-1 bucket edges for all rounds");
  se_cmd->add_option("--parallel", se_parallel, "Max concurrent commands")->capture_default_str();
  se_cmd->add_option("--timeout", se_timeout, "Command timeout in seconds")
      ->capture_default_str();
  se_cmd->add_option("--model-out", se_model_out, "Also save the final ensemble here");
  add_ea_flags(se_cmd, &se_ea);
  add_gbdt_flags(se_cmd, &se_gbdt);

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Exhaustive synthetic-oracle reference");
  oracle->require_subcommand(1);
  auto* oracle_best = oracle->add_subcommand("best", "Argmax mAP under a latency bound");
  double ob_latency = 1e18;
  std::uint64_t ob_seed = 0;
  std::string ob_noise = "on";
  oracle_best->add_option("--latency-max", ob_latency, "Latency bound (ms)")
      ->capture_default_str();
  oracle_best->add_option("--oracle-seed", ob_seed, "Synthetic oracle seed")->required();
  oracle_best->add_option("--noise", ob_noise, "on|off")->capture_default_str();
  auto* oracle_sweep = oracle->add_subcommand("sweep", "Full-space sweep with optional CSV");
  double os_latency = 1e18;
  std::uint64_t os_seed = 0, os_every = 1000;
  std::string os_noise = "on", os_out;
  oracle_sweep->add_option("--latency-max", os_latency, "Latency bound (ms)")
      ->capture_default_str();
  oracle_sweep->add_option("--oracle-seed", os_seed, "Synthetic oracle seed")->required();
  oracle_sweep->add_option("--noise", os_noise, "on|off")->capture_default_str();
  oracle_sweep->add_option("--every", os_every, "CSV row thinning step")->capture_default_str();
  oracle_sweep->add_option("--out", os_out, "CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    std::cerr << "run with --help for usage\n";
    return 1;
  }

  try {
    if (*space_info) return cmd_space_info(with_costs);
    if (*sample_cmd) {
      return cmd_sample(strategy, sample_n, sample_seed, sample_bins, sample_out, argv_copy);
    }
    if (*eval_cmd) {
      return cmd_evaluate(eval_db, eval_spec, eval_parallel, eval_timeout, argv_copy);
    }
    if (*db_stats) return cmd_db_stats(stats_file);
    if (*db_merge) return cmd_db_merge(merge_a, merge_b, merge_out, argv_copy);
    if (*db_export) return cmd_db_export_csv(export_file, export_model, export_out, argv_copy);
    if (*train_cmd) {
      return cmd_predictor_train(train_db, train_out, train_seed, train_members,
                                 train_val_split, train_flags, argv_copy);
    }
    if (*eval_model_cmd) return cmd_predictor_eval(peval_model, peval_db);
    if (*search_cmd) {
      return cmd_search(search_model, search_target, search_seed, search_top, search_ea,
                        search_out, argv_copy);
    }
    if (*se_cmd) {
      return cmd_self_evolve(se_db, se_rounds, se_buckets, se_top, se_members, se_spec, se_seed,
                             se_out, se_log, se_freeze, se_parallel, se_timeout, se_ea, se_gbdt,
                             se_model_out, argv_copy);
    }
    if (*oracle_best) return cmd_oracle_best(ob_latency, ob_seed, ob_noise);
    if (*oracle_sweep) {
      return cmd_oracle_sweep(os_seed, os_noise, os_latency, os_every, os_out, argv_copy);
    }
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const archbench::EvaluatorError& e) {
    std::cerr << "evaluator error: " << e.what() << '\n';
    return 3;
  } catch (const archbench::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
