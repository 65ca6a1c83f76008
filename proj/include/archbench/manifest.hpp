#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "archbench/common.hpp"
#include "archbench/database.hpp"

namespace archbench {

/// FNV-1a digest of a file's bytes, as "fnv1a64:<hex>".
inline std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("digest: cannot open " + path.string());
  std::uint64_t h = kFnvOffsetBasis;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= kFnvPrime;
    }
  }
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + hex;
}

/// Reproducibility envelope written next to a mutating command's first output
/// as `<out>.manifest.json`. Timestamps and durations live only here, so the
/// data outputs themselves stay byte-identical across reruns.
struct RunManifest {
  std::vector<std::string> argv;
  std::vector<std::uint64_t> seeds;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  void write(const std::filesystem::path& primary_output) const {
    json j;
    j["version"] = std::string(kVersion);
    j["argv"] = argv;
    j["seeds"] = seeds;
    json in = json::object();
    for (const auto& p : inputs) in[p.string()] = file_digest(p);
    j["inputs"] = std::move(in);
    json out = json::object();
    for (const auto& p : outputs) out[p.string()] = file_digest(p);
    j["outputs"] = std::move(out);
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - started)
                          .count();
    j["duration_ms"] = ms;
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["timestamp"] = stamp;

    std::filesystem::path path = primary_output;
    path += ".manifest.json";
    std::ofstream file(path, std::ios::trunc);
    if (!file) throw DataError("cannot write " + path.string());
    file << j.dump(2) << '\n';
  }
};

}  // namespace archbench
