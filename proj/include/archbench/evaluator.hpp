#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdint>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "archbench/common.hpp"
#include "archbench/cost_model.hpp"
#include "archbench/database.hpp"
#include "archbench/search_space.hpp"

namespace archbench {

struct Evaluation {
  double map_50_95 = 0;
  double latency_ms = 0;
};

enum class EvaluatorKind { synthetic, table, command };

struct EvaluatorSpec {
  EvaluatorKind kind = EvaluatorKind::synthetic;
  // synthetic
  std::uint64_t oracle_seed = 0;
  bool noise = true;
  // table
  std::string table_path;
  // command
  std::string command_line;
  int max_parallel = 1;
  double timeout_sec = 300.0;

  /// "synthetic:SEED" | "table:PATH" | "cmd:COMMAND LINE"
  static EvaluatorSpec parse(std::string_view text) {
    EvaluatorSpec spec;
    const std::size_t colon = text.find(':');
    if (colon == std::string_view::npos) {
      throw std::invalid_argument("evaluator spec must be kind:params, got '" +
                                  std::string(text) + "'");
    }
    const std::string_view kind = text.substr(0, colon);
    const std::string_view rest = text.substr(colon + 1);
    if (kind == "synthetic") {
      spec.kind = EvaluatorKind::synthetic;
      try {
        spec.oracle_seed = std::stoull(std::string(rest));
      } catch (const std::exception&) {
        throw std::invalid_argument("synthetic evaluator needs an integer seed");
      }
    } else if (kind == "table") {
      if (rest.empty()) throw std::invalid_argument("table evaluator needs a path");
      spec.kind = EvaluatorKind::table;
      spec.table_path = std::string(rest);
    } else if (kind == "cmd") {
      if (rest.empty()) throw std::invalid_argument("cmd evaluator needs a command line");
      spec.kind = EvaluatorKind::command;
      spec.command_line = std::string(rest);
    } else {
      throw std::invalid_argument("unknown evaluator kind '" + std::string(kind) + "'");
    }
    return spec;
  }
};

// Synthetic oracle noise: FNV-1a over the canonical string and the seed bytes,
// mapped linearly onto [-1, 1). Hash-derived rather than stream-drawn, so
// evaluation order never changes results.
inline double synthetic_noise_unit(const ArchConfig& c, std::uint64_t oracle_seed) {
  std::uint64_t h = fnv1a64(canonical(c));
  h = fnv1a64_append(h, oracle_seed);
  const double u01 = static_cast<double>(h >> 11) * 0x1.0p-53;
  return 2.0 * u01 - 1.0;
}

/// Closed-form mAP stand-in: concave in total cost (diminishing returns),
/// small operator bonuses, a depth-imbalance penalty, and +-0.003 hash noise.
inline double synthetic_map(const ArchConfig& c, std::uint64_t oracle_seed,
                            bool noise = true) {
  const double p = cost(c).total_cost;
  const double base = 0.18 + 0.16 * (1.0 - std::exp(-p / 30.0));
  double bonus = 0.0;
  if (c.op_p5 == Op::C2PSA) bonus += 0.006;
  if (c.op_p4 == Op::C2fCIB) bonus += 0.003;
  if (c.op_neck == Op::C3k2) bonus += 0.002;
  if (c.op_neck_down == Op::SCDown) bonus += 0.001;
  if (c.op_p5 == Op::C2PSA && c.op_neck == Op::C2fCIB) bonus += 0.003;
  bonus -= 0.004 * std::abs(c.d_p3 - c.d_p4);
  const double n = noise ? 0.003 * synthetic_noise_unit(c, oracle_seed) : 0.0;
  return std::clamp(base + bonus + n, 0.0, 1.0);
}

namespace detail {

struct CommandResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string out;
  std::string err;
};

// Run `sh -c command`, feed `input` on stdin, capture stdout/stderr, enforce a
// wall-clock deadline (SIGKILL on expiry).
inline CommandResult run_command(const std::string& command, const std::string& input,
                                 double timeout_sec) {
  static const bool sigpipe_ignored = [] {
    std::signal(SIGPIPE, SIG_IGN);  // a child may exit without reading stdin
    return true;
  }();
  (void)sigpipe_ignored;

  // O_CLOEXEC so concurrently forked children never inherit each other's
  // pipe ends (that would delay EOF on stdout past the writer's exit).
  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0 ||
      pipe2(err_pipe, O_CLOEXEC) != 0) {
    throw EvaluatorError("pipe2() failed");
  }
  const pid_t pid = fork();
  if (pid < 0) throw EvaluatorError("fork() failed");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) {
      close(fd);
    }
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  close(err_pipe[1]);

  // Write the request; EPIPE just means the child did not read it.
  std::size_t written = 0;
  while (written < input.size()) {
    const ssize_t k = write(in_pipe[1], input.data() + written, input.size() - written);
    if (k <= 0) break;
    written += static_cast<std::size_t>(k);
  }
  close(in_pipe[1]);

  CommandResult result;
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(timeout_sec));
  struct pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  bool open_fd[2] = {true, true};
  char buf[4096];
  while (open_fd[0] || open_fd[1]) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      result.timed_out = true;
      kill(pid, SIGKILL);
      break;
    }
    const int wait_ms = static_cast<int>(std::min<std::int64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1, 1000));
    fds[0].events = open_fd[0] ? POLLIN : 0;
    fds[1].events = open_fd[1] ? POLLIN : 0;
    if (poll(fds, 2, wait_ms) < 0) break;
    for (int i = 0; i < 2; ++i) {
      if (!open_fd[i] || fds[i].revents == 0) continue;
      const ssize_t k = read(fds[i].fd, buf, sizeof buf);
      if (k > 0) {
        (i == 0 ? result.out : result.err).append(buf, static_cast<std::size_t>(k));
      } else {
        open_fd[i] = false;
      }
    }
  }
  close(out_pipe[0]);
  close(err_pipe[0]);
  int status = 0;
  waitpid(pid, &status, 0);
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else {
    result.exit_code = 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  }
  return result;
}

inline std::string stderr_excerpt(const std::string& err) {
  std::string e = err.substr(0, 300);
  std::replace(e.begin(), e.end(), '\n', ' ');
  return e;
}

}  // namespace detail

/// Pluggable ground-truth source. Construction loads the replay table for the
/// table kind; evaluate() dispatches by kind. Synthetic and table evaluation
/// is pure; command evaluation spawns one subprocess per call.
class Evaluator {
 public:
  explicit Evaluator(EvaluatorSpec spec) : spec_(std::move(spec)) {
    if (spec_.kind == EvaluatorKind::table) {
      const Pool table = load_pool(spec_.table_path);
      for (const ArchRecord& r : table) {
        if (r.evaluated()) table_.emplace(r.id, Evaluation{*r.map_50_95, *r.latency_ms});
      }
    }
  }

  const EvaluatorSpec& spec() const { return spec_; }

  Evaluation evaluate(const ArchConfig& config) const {
    switch (spec_.kind) {
      case EvaluatorKind::synthetic:
        return {synthetic_map(config, spec_.oracle_seed, spec_.noise), latency_proxy(config)};
      case EvaluatorKind::table: {
        auto it = table_.find(config_id(config));
        if (it == table_.end()) {
          throw EvaluatorError("table miss for config: " + canonical(config));
        }
        return it->second;
      }
      case EvaluatorKind::command:
        return evaluate_command(config);
    }
    throw EvaluatorError("unknown evaluator kind");
  }

  /// Latency to use as the search constraint: the evaluator's own latency
  /// where it is known without side effects (synthetic formula, table hit),
  /// the cost-model proxy otherwise.
  double search_latency(const ArchConfig& config) const {
    if (spec_.kind == EvaluatorKind::table) {
      auto it = table_.find(config_id(config));
      if (it != table_.end()) return it->second.latency_ms;
    }
    return latency_proxy(config);
  }

 private:
  Evaluation evaluate_command(const ArchConfig& config) const {
    const std::string cfg_str = canonical(config);
    nlohmann::json request;
    request["config"] = cfg_str;
    const detail::CommandResult res =
        detail::run_command(spec_.command_line, request.dump() + "\n", spec_.timeout_sec);
    if (res.timed_out) {
      throw EvaluatorError("command timed out after " + std::to_string(spec_.timeout_sec) +
                           "s for config: " + cfg_str);
    }
    if (res.exit_code != 0) {
      throw EvaluatorError("command exited with code " + std::to_string(res.exit_code) +
                           " for config: " + cfg_str + "; stderr: " +
                           detail::stderr_excerpt(res.err));
    }
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res.out);
    } catch (const nlohmann::json::exception& e) {
      throw EvaluatorError("command produced malformed JSON for config: " + cfg_str + "; " +
                           e.what());
    }
    if (!reply.is_object() || !reply.contains("map_50_95") || !reply.contains("latency_ms") ||
        !reply["map_50_95"].is_number() || !reply["latency_ms"].is_number()) {
      throw EvaluatorError("command output missing map_50_95/latency_ms for config: " + cfg_str);
    }
    Evaluation ev{reply["map_50_95"].get<double>(), reply["latency_ms"].get<double>()};
    if (!(ev.map_50_95 >= 0.0 && ev.map_50_95 <= 1.0)) {
      throw EvaluatorError("command returned map_50_95 outside [0, 1] for config: " + cfg_str);
    }
    if (!(ev.latency_ms > 0.0)) {
      throw EvaluatorError("command returned non-positive latency_ms for config: " + cfg_str);
    }
    return ev;
  }

  EvaluatorSpec spec_;
  std::unordered_map<std::uint64_t, Evaluation> table_;
};

/// Evaluate a batch with at most `spec.max_parallel` concurrent command
/// processes. Results are positional, so concurrency never reorders them; the
/// lowest-index failure is the one reported.
inline std::vector<Evaluation> evaluate_batch(const Evaluator& evaluator,
                                              const std::vector<ArchConfig>& configs) {
  const int parallel =
      evaluator.spec().kind == EvaluatorKind::command
          ? std::max(1, std::min<int>(evaluator.spec().max_parallel,
                                      static_cast<int>(configs.size())))
          : 1;
  std::vector<Evaluation> results(configs.size());
  if (parallel <= 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) {
      results[i] = evaluator.evaluate(configs[i]);
    }
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::pair<std::size_t, std::string>> failures;
  std::mutex failures_mutex;
  std::vector<std::thread> workers;
  workers.reserve(parallel);
  for (int w = 0; w < parallel; ++w) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= configs.size()) return;
        try {
          results[i] = evaluator.evaluate(configs[i]);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(failures_mutex);
          failures.emplace_back(i, e.what());
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (!failures.empty()) {
    auto first = std::min_element(failures.begin(), failures.end());
    throw EvaluatorError(first->second);
  }
  return results;
}

}  // namespace archbench
