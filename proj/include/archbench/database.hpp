#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "archbench/common.hpp"
#include "archbench/rng.hpp"
#include "archbench/search_space.hpp"

namespace archbench {

using json = nlohmann::ordered_json;

/// One row of the ground-truth pool. `id` is the FNV-1a hash of the canonical
/// config string, so re-sampling a config can never duplicate ground truth.
struct ArchRecord {
  std::uint64_t id = 0;
  ArchConfig config;
  std::optional<double> map_50_95;
  std::optional<double> latency_ms;
  std::string source = "random";
  int created_round = 0;

  bool evaluated() const { return map_50_95.has_value() && latency_ms.has_value(); }
  bool operator==(const ArchRecord&) const = default;
};

inline ArchRecord make_record(const ArchConfig& config, std::string source,
                              int created_round = 0) {
  ArchRecord r;
  r.id = config_id(config);
  r.config = config;
  r.source = std::move(source);
  r.created_round = created_round;
  return r;
}

inline bool valid_source_tag(std::string_view s) {
  if (s == "random" || s == "stratified" || s == "lhs" || s == "search") return true;
  constexpr std::string_view prefix = "self_evolve_round_";
  if (s.substr(0, prefix.size()) != prefix) return false;
  const std::string_view k = s.substr(prefix.size());
  if (k.empty() || k[0] == '0') return false;
  return std::all_of(k.begin(), k.end(), [](char c) { return c >= '0' && c <= '9'; });
}

/// Field-order preserving JSONL row.
inline json record_to_json(const ArchRecord& r) {
  json j;
  j["id"] = r.id;
  j["config"] = canonical(r.config);
  j["map_50_95"] = r.map_50_95 ? json(*r.map_50_95) : json(nullptr);
  j["latency_ms"] = r.latency_ms ? json(*r.latency_ms) : json(nullptr);
  j["source"] = r.source;
  j["created_round"] = r.created_round;
  return j;
}

inline ArchRecord record_from_json(const json& j) {
  ArchRecord r;
  if (!j.is_object()) throw DataError("record is not a JSON object");
  for (const char* key : {"id", "config", "map_50_95", "latency_ms", "source", "created_round"}) {
    if (!j.contains(key)) throw DataError(std::string("record missing key '") + key + "'");
  }
  if (!j["id"].is_number_unsigned()) throw DataError("record id must be an unsigned integer");
  r.id = j["id"].get<std::uint64_t>();
  r.config = parse_canonical(j["config"].get<std::string>());
  if (auto v = validate(r.config); !v) throw DataError("invalid config: " + v.violation);
  if (r.id != config_id(r.config)) throw DataError("id does not match hash of config");
  if (!j["map_50_95"].is_null()) {
    const double m = j["map_50_95"].get<double>();
    if (!(m >= 0.0 && m <= 1.0)) throw DataError("map_50_95 outside [0, 1]");
    r.map_50_95 = m;
  }
  if (!j["latency_ms"].is_null()) {
    const double l = j["latency_ms"].get<double>();
    if (!(l > 0.0)) throw DataError("latency_ms must be positive");
    r.latency_ms = l;
  }
  if (r.map_50_95.has_value() != r.latency_ms.has_value()) {
    throw DataError("map_50_95 and latency_ms must be both present or both null");
  }
  r.source = j["source"].get<std::string>();
  if (!valid_source_tag(r.source)) throw DataError("unknown source tag '" + r.source + "'");
  if (!j["created_round"].is_number_integer()) throw DataError("created_round must be an integer");
  r.created_round = j["created_round"].get<int>();
  if (r.created_round < 0) throw DataError("created_round must be >= 0");
  return r;
}

/// Id-keyed record collection. Iteration follows insertion order, which keeps
/// saved files append-shaped across self-evolve rounds.
class Pool {
 public:
  Pool() = default;

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  bool contains(std::uint64_t id) const { return index_.contains(id); }

  const ArchRecord* find(std::uint64_t id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  void add(ArchRecord record) {
    if (index_.contains(record.id)) {
      throw DataError("duplicate record id " + std::to_string(record.id));
    }
    index_.emplace(record.id, records_.size());
    records_.push_back(std::move(record));
  }

  /// Replace an existing record with the same id.
  void replace(ArchRecord record) {
    auto it = index_.find(record.id);
    if (it == index_.end()) throw DataError("replace: id not in pool");
    records_[it->second] = std::move(record);
  }

  const std::vector<ArchRecord>& records() const { return records_; }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  std::size_t evaluated_count() const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(),
                      [](const ArchRecord& r) { return r.evaluated(); }));
  }

  bool operator==(const Pool& other) const { return records_ == other.records_; }

 private:
  std::vector<ArchRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// Parse a JSONL pool file. Errors carry 1-based line numbers.
inline Pool load_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Pool pool;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + " line " + std::to_string(line_no) +
                      ": parse error: " + e.what());
    }
    try {
      ArchRecord r = record_from_json(j);
      if (pool.contains(r.id)) {
        throw DataError("duplicate id " + std::to_string(r.id));
      }
      pool.add(std::move(r));
    } catch (const DataError& e) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pool;
}

/// Atomic JSONL write (temp file in the same directory, then rename).
inline void save_pool(const Pool& pool, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    for (const ArchRecord& r : pool) {
      out << record_to_json(r).dump() << '\n';
    }
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Union by id. On collision the evaluated record wins; two evaluated records
/// for the same config must agree on mAP (ground truth is unique).
inline Pool merge(const Pool& a, const Pool& b) {
  Pool out;
  for (const ArchRecord& r : a) out.add(r);
  for (const ArchRecord& r : b) {
    const ArchRecord* existing = out.find(r.id);
    if (existing == nullptr) {
      out.add(r);
      continue;
    }
    if (existing->evaluated() && r.evaluated()) {
      if (existing->map_50_95 != r.map_50_95) {
        throw DataError("conflicting evaluations for id " + std::to_string(r.id) + " (" +
                        canonical(r.config) + ")");
      }
      continue;  // keep the first
    }
    if (r.evaluated()) out.replace(r);
  }
  return out;
}

/// Seeded split of the evaluated records: ids are sorted, shuffled, and the
/// first ceil(n * val_fraction) become validation. Unevaluated records belong
/// to neither side.
inline std::pair<Pool, Pool> split(const Pool& pool, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("split: val_fraction must be in (0, 1)");
  }
  std::vector<std::uint64_t> ids;
  for (const ArchRecord& r : pool) {
    if (r.evaluated()) ids.push_back(r.id);
  }
  if (ids.size() < 2) throw DataError("split: need at least 2 evaluated records");
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    const std::size_t j = uniform_below(rng, i);
    std::swap(ids[i - 1], ids[j]);
  }
  const std::size_t n_val = ceil_frac(ids.size(), val_fraction);
  Pool train, val;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    (i < n_val ? val : train).add(*pool.find(ids[i]));
  }
  return {std::move(train), std::move(val)};
}

}  // namespace archbench
