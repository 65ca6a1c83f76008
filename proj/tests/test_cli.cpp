#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <string>

#include "archbench/database.hpp"
#include "archbench/evaluator.hpp"
#include "archbench/gbdt.hpp"
#include "test_util.hpp"

// Binary under test, injected by the build.
#ifndef ARCHBENCH_CLI_PATH
#error "ARCHBENCH_CLI_PATH must be defined"
#endif

using namespace archbench;

namespace {

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  const auto r = archbench::detail::run_command(std::string(ARCHBENCH_CLI_PATH) + " " + args,
                                                "", 300.0);
  return {r.exit_code, r.out, r.err};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("space info reports the exact cardinality and encoding width") {
  const CliResult r = run_cli("space info");
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["cardinality"] == 1679616);
  CHECK(j["feature_dimension"] == 24);
  CHECK(j["dimensions"].size() == 14);
}

TEST_CASE("space info --costs exposes the cost model constants") {
  const CliResult r = run_cli("space info --costs");
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["cost_model"]["operator_weights"]["C2PSA"] == 1.3);
  CHECK(j["cost_model"]["latency_base_ms"] == 5.0);
  CHECK(j["cost_range"]["max_total_cost"] == 202.25);
}

TEST_CASE("sample writes records plus a manifest, byte-identical across reruns") {
  testutil::TempDir dir("cli");
  const std::string out1 = dir.file("a.jsonl").string();
  const std::string out2 = dir.file("b.jsonl").string();
  REQUIRE(run_cli("sample --strategy lhs --n 40 --seed 5 --out " + out1).exit_code == 0);
  REQUIRE(run_cli("sample --strategy lhs --n 40 --seed 5 --out " + out2).exit_code == 0);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(std::filesystem::exists(out1 + ".manifest.json"));

  const Pool pool = load_pool(out1);
  CHECK(pool.size() == 40);
  for (const ArchRecord& r : pool) {
    CHECK_FALSE(r.evaluated());
    CHECK(r.source == "lhs");
  }
}

TEST_CASE("randomized commands require an explicit seed") {
  testutil::TempDir dir("cli");
  const CliResult r =
      run_cli("sample --strategy random --n 5 --out " + dir.file("x.jsonl").string());
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("--seed") != std::string::npos);

  const CliResult t = run_cli("predictor train --db x.jsonl --out m.json");
  CHECK(t.exit_code == 1);
}

TEST_CASE("evaluate fills nulls in place with the synthetic oracle") {
  testutil::TempDir dir("cli");
  const std::string db = dir.file("db.jsonl").string();
  REQUIRE(run_cli("sample --strategy random --n 30 --seed 2 --out " + db).exit_code == 0);
  REQUIRE(run_cli("evaluate --db " + db + " --evaluator synthetic:1").exit_code == 0);
  const Pool pool = load_pool(db);
  for (const ArchRecord& r : pool) {
    REQUIRE(r.evaluated());
    CHECK(*r.map_50_95 == synthetic_map(r.config, 1, true));
    CHECK(*r.latency_ms == latency_proxy(r.config));
  }
}

TEST_CASE("bad usage, bad data, and evaluator failure map to exit codes 1, 2, 3") {
  testutil::TempDir dir("cli");
  CHECK(run_cli("sample --strategy bogus --n 5 --seed 1 --out " +
                dir.file("x.jsonl").string())
            .exit_code == 1);
  CHECK(run_cli("db stats " + dir.file("missing.jsonl").string()).exit_code == 2);

  const std::string db = dir.file("db.jsonl").string();
  REQUIRE(run_cli("sample --strategy random --n 4 --seed 3 --out " + db).exit_code == 0);
  const CliResult r = run_cli("evaluate --db " + db + " --evaluator 'cmd:exit 7'");
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("exited with code 7") != std::string::npos);
}

TEST_CASE("db stats and merge work end to end") {
  testutil::TempDir dir("cli");
  const std::string a = dir.file("a.jsonl").string();
  const std::string b = dir.file("b.jsonl").string();
  const std::string c = dir.file("c.jsonl").string();
  REQUIRE(run_cli("sample --strategy random --n 20 --seed 1 --out " + a).exit_code == 0);
  REQUIRE(run_cli("sample --strategy random --n 20 --seed 999 --out " + b).exit_code == 0);
  REQUIRE(run_cli("db merge " + a + " " + b + " --out " + c).exit_code == 0);

  const CliResult stats = run_cli("db stats " + c);
  REQUIRE(stats.exit_code == 0);
  const json j = json::parse(stats.out);
  CHECK(j["records"] == load_pool(c).size());
  CHECK(j["evaluated"] == 0);
}

TEST_CASE("db merge rejects conflicting ground truth with exit 2") {
  testutil::TempDir dir("cli");
  Pool a, b;
  ArchRecord ra = make_record(testutil::first_config(), "random", 0);
  ra.map_50_95 = 0.30;
  ra.latency_ms = 82.0;
  a.add(ra);
  ArchRecord rb = ra;
  rb.map_50_95 = 0.31;
  b.add(rb);
  save_pool(a, dir.file("a.jsonl"));
  save_pool(b, dir.file("b.jsonl"));
  const CliResult r = run_cli("db merge " + dir.file("a.jsonl").string() + " " +
                              dir.file("b.jsonl").string() + " --out " +
                              dir.file("c.jsonl").string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("conflict") != std::string::npos);
}

TEST_CASE("predictor train prints metrics and saves a loadable ensemble") {
  testutil::TempDir dir("cli");
  const std::string db = dir.file("db.jsonl").string();
  const std::string model = dir.file("model.json").string();
  REQUIRE(run_cli("sample --strategy random --n 120 --seed 4 --out " + db).exit_code == 0);
  REQUIRE(run_cli("evaluate --db " + db + " --evaluator synthetic:1").exit_code == 0);
  const CliResult r = run_cli("predictor train --db " + db + " --out " + model +
                              " --seed 1 --ensemble 3 --trees 60");
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["n"] == 24);  // ceil(120 * 0.2)
  CHECK(j["r2"].is_number());
  CHECK(j.contains("kendall_tau"));
  CHECK(j.contains("skt"));

  const Model loaded = load_model(model);
  REQUIRE(std::holds_alternative<EnsemblePredictor>(loaded));
  CHECK(std::get<EnsemblePredictor>(loaded).members.size() == 3);

  // Byte-identical rerun of a model-producing command.
  const std::string model2 = dir.file("model2.json").string();
  REQUIRE(run_cli("predictor train --db " + db + " --out " + model2 +
                  " --seed 1 --ensemble 3 --trees 60")
              .exit_code == 0);
  CHECK(slurp(model) == slurp(model2));
}

TEST_CASE("predictor eval reports metrics for a stored model") {
  testutil::TempDir dir("cli");
  const std::string db = dir.file("db.jsonl").string();
  const std::string model = dir.file("model.json").string();
  REQUIRE(run_cli("sample --strategy stratified --n 96 --bins 8 --seed 4 --out " + db)
              .exit_code == 0);
  REQUIRE(run_cli("evaluate --db " + db + " --evaluator synthetic:2").exit_code == 0);
  REQUIRE(run_cli("predictor train --db " + db + " --out " + model +
                  " --seed 2 --ensemble 2 --trees 50")
              .exit_code == 0);
  const CliResult r = run_cli("predictor eval --model " + model + " --db " + db);
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["n"] == 96);
  CHECK(j["r2"].get<double>() > 0.5);  // in-sample fit of a smooth target
}

TEST_CASE("search writes feasible ranked records and a summary") {
  testutil::TempDir dir("cli");
  const std::string db = dir.file("db.jsonl").string();
  const std::string model = dir.file("model.json").string();
  const std::string found = dir.file("found.jsonl").string();
  REQUIRE(run_cli("sample --strategy random --n 100 --seed 6 --out " + db).exit_code == 0);
  REQUIRE(run_cli("evaluate --db " + db + " --evaluator synthetic:1").exit_code == 0);
  REQUIRE(run_cli("predictor train --db " + db + " --out " + model +
                  " --seed 3 --ensemble 2 --trees 50")
              .exit_code == 0);
  const CliResult r = run_cli("search --model " + model +
                              " --target-latency 150 --seed 4 --top 5"
                              " --ea-population 20 --ea-generations 10 --out " + found);
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["found"] == 5);
  const Pool pool = load_pool(found);
  CHECK(pool.size() == 5);
  for (const ArchRecord& rec : pool) {
    CHECK(rec.source == "search");
    CHECK_FALSE(rec.evaluated());
    CHECK(latency_proxy(rec.config) <= 150.0);
  }
}

TEST_CASE("self-evolve runs end to end and logs one line per round") {
  testutil::TempDir dir("cli");
  const std::string db = dir.file("db.jsonl").string();
  const std::string out = dir.file("grown.jsonl").string();
  const std::string log = dir.file("rounds.jsonl").string();
  REQUIRE(run_cli("sample --strategy random --n 60 --seed 8 --out " + db).exit_code == 0);
  REQUIRE(run_cli("evaluate --db " + db + " --evaluator synthetic:1").exit_code == 0);
  const CliResult r = run_cli(
      "self-evolve --db " + db + " --rounds 2 --buckets 3 --top 2 --ensemble 2"
      " --evaluator synthetic:1 --seed 5 --out " + out + " --log " + log +
      " --ea-population 10 --ea-generations 8 --trees 40 --min-leaf 3");
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["rounds"] == 2);
  CHECK(j["pool_size"] == 72);

  const Pool grown = load_pool(out);
  CHECK(grown.size() == 72);

  std::ifstream log_in(log);
  std::string line;
  int lines = 0;
  while (std::getline(log_in, line)) {
    const json lj = json::parse(line);
    ++lines;
    CHECK(lj["round"] == lines);
    CHECK(lj["added_ids"].size() == 6);
    CHECK(lj["bucket_ranges"].size() == 3);
    CHECK(lj.contains("r2"));
    CHECK(lj.contains("skt"));
    CHECK(lj.contains("collisions"));
  }
  CHECK(lines == 2);
}

TEST_CASE("self-evolve left the pool at the last consistent state on failure") {
  testutil::TempDir dir("cli");
  const std::string db = dir.file("db.jsonl").string();
  const std::string out = dir.file("grown.jsonl").string();
  const std::string log = dir.file("rounds.jsonl").string();
  REQUIRE(run_cli("sample --strategy random --n 60 --seed 9 --out " + db).exit_code == 0);
  REQUIRE(run_cli("evaluate --db " + db + " --evaluator synthetic:1").exit_code == 0);
  // The stub answers a fixed number of calls, then fails: round 1 evaluates
  // 6 configs (cmd evaluator), round 2 dies on its first call.
  const std::string counter = dir.file("count").string();
  const std::string stub = dir.file("stub.sh").string();
  {
    std::ofstream s(stub);
    s << "#!/bin/sh\n"
      << "n=$(cat " << counter << " 2>/dev/null || echo 0)\n"
      << "n=$((n+1))\n"
      << "echo $n > " << counter << "\n"
      << "if [ $n -gt 6 ]; then exit 1; fi\n"
      << "printf '{\"map_50_95\":0.3,\"latency_ms\":90.0}'\n";
  }
  std::filesystem::permissions(stub, std::filesystem::perms::owner_all);
  const CliResult r = run_cli(
      "self-evolve --db " + db + " --rounds 2 --buckets 3 --top 2 --ensemble 2"
      " --evaluator cmd:" + stub + " --seed 5 --out " + out + " --log " + log +
      " --ea-population 10 --ea-generations 8 --trees 40 --min-leaf 3");
  CHECK(r.exit_code == 3);
  // Round 1 completed and was persisted; round 2 was not.
  const Pool grown = load_pool(out);
  CHECK(grown.size() == 66);
}

TEST_CASE("db export-csv emits the documented columns") {
  testutil::TempDir dir("cli");
  const std::string db = dir.file("db.jsonl").string();
  REQUIRE(run_cli("sample --strategy random --n 10 --seed 10 --out " + db).exit_code == 0);
  REQUIRE(run_cli("evaluate --db " + db + " --evaluator synthetic:3").exit_code == 0);
  const CliResult r = run_cli("db export-csv " + db);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.rfind("id,total_cost,latency_ms,map_50_95,predicted_map,source\n", 0) == 0);
  int lines = 0;
  for (char ch : r.out) lines += ch == '\n';
  CHECK(lines == 11);
}

TEST_CASE("oracle best finds the feasible argmax") {
  const CliResult r = run_cli("oracle best --latency-max 82.0 --oracle-seed 1 --noise off");
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["latency_ms"].get<double>() <= 82.0);
  CHECK(j["map_50_95"].get<double>() > 0.28);
  const ArchConfig best = parse_canonical(j["config"].get<std::string>());
  CHECK(synthetic_map(best, 1, false) == j["map_50_95"].get<double>());
}

TEST_CASE("oracle sweep summarizes the space and thins CSV rows") {
  testutil::TempDir dir("cli");
  const std::string out = dir.file("sweep.csv").string();
  const CliResult r =
      run_cli("oracle sweep --oracle-seed 1 --noise off --every 100000 --out " + out);
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["cardinality"] == 1679616);
  CHECK(j["feasible_count"] == 1679616);
  const std::string csv = slurp(out);
  int lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == 1 + 17);  // header + ceil(1679616 / 100000)
}

TEST_CASE("evaluate rerun on an already-evaluated db is a no-op rewrite") {
  testutil::TempDir dir("cli");
  const std::string db = dir.file("db.jsonl").string();
  REQUIRE(run_cli("sample --strategy random --n 12 --seed 11 --out " + db).exit_code == 0);
  REQUIRE(run_cli("evaluate --db " + db + " --evaluator synthetic:1").exit_code == 0);
  const std::string before = slurp(db);
  REQUIRE(run_cli("evaluate --db " + db + " --evaluator synthetic:1").exit_code == 0);
  CHECK(slurp(db) == before);
}
