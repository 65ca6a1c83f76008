#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "archbench/common.hpp"
#include "archbench/cost_model.hpp"
#include "archbench/rng.hpp"
#include "archbench/search_space.hpp"

namespace archbench {

/// Truncation-selection EA with elitism, uniform crossover, and per-dimension
/// mutation; latency is a hard constraint.
struct EAParams {
  int population = 50;
  int generations = 100;
  double parent_fraction = 0.25;
  double crossover_fraction = 0.5;
  double mutation_fraction = 0.5;
  double mutation_prob = 0.2;
  double elite_fraction = 0.10;
  std::uint64_t seed = 0;
};

inline void validate_params(const EAParams& p) {
  if (p.population < 4) throw std::invalid_argument("ea: population must be >= 4");
  if (p.generations < 1) throw std::invalid_argument("ea: generations must be >= 1");
  for (double f : {p.parent_fraction, p.crossover_fraction, p.mutation_fraction,
                   p.mutation_prob, p.elite_fraction}) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw std::invalid_argument("ea: fractions must lie in (0, 1]");
    }
  }
  if (std::abs(p.crossover_fraction + p.mutation_fraction - 1.0) > 1e-12) {
    throw std::invalid_argument("ea: crossover_fraction + mutation_fraction must equal 1");
  }
}

struct InfeasibleTargetError : DataError {
  using DataError::DataError;
};

struct SearchEntry {
  ArchConfig config;
  double predicted_map = 0;
  double latency_ms = 0;
};

/// Entries are distinct configs sorted by predicted mAP descending, all
/// satisfying the latency constraint, collected over every generation.
struct SearchResult {
  std::vector<SearchEntry> entries;
  std::vector<double> best_fitness_per_generation;
  std::size_t distinct_evaluated = 0;
  std::size_t fitness_calls = 0;
};

using FitnessFn = std::function<double(const ArchConfig&)>;
using LatencyFn = std::function<double(const ArchConfig&)>;

inline SearchResult ea_search(const FitnessFn& fitness, const LatencyFn& latency,
                              double target_latency, const EAParams& params, int top_k) {
  validate_params(params);
  if (top_k < 1) throw std::invalid_argument("ea_search: top_k must be >= 1");

  Rng rng(params.seed);
  const std::uint64_t card = cardinality();

  struct Known {
    ArchConfig config;
    double fitness;
    double latency;
  };
  std::unordered_map<std::uint64_t, Known> seen;  // fitness memoized by config id
  std::size_t fitness_calls = 0;

  auto lookup = [&](const ArchConfig& c, double known_latency) -> std::pair<std::uint64_t, double> {
    const std::uint64_t id = config_id(c);
    auto it = seen.find(id);
    if (it == seen.end()) {
      const double f = fitness(c);
      ++fitness_calls;
      it = seen.emplace(id, Known{c, f, known_latency}).first;
    }
    return {id, it->second.fitness};
  };

  auto random_feasible = [&](std::size_t max_attempts) -> std::optional<ArchConfig> {
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
      ArchConfig c = config_from_index(uniform_below(rng, card));
      if (latency(c) <= target_latency) return c;
    }
    return std::nullopt;
  };

  struct Member {
    ArchConfig config;
    std::uint64_t id;
    double fitness;
  };
  std::vector<Member> population;
  population.reserve(params.population);

  // Initial population by rejection sampling over uniform random configs.
  {
    const std::size_t max_attempts = 10000 * static_cast<std::size_t>(params.population);
    std::size_t attempts = 0;
    while (population.size() < static_cast<std::size_t>(params.population) &&
           attempts < max_attempts) {
      ++attempts;
      ArchConfig c = config_from_index(uniform_below(rng, card));
      const double lat = latency(c);
      if (lat > target_latency) continue;
      auto [id, fit] = lookup(c, lat);
      population.push_back(Member{c, id, fit});
    }
    if (population.size() < static_cast<std::size_t>(params.population)) {
      throw InfeasibleTargetError(
          "ea_search: could not assemble a feasible initial population for target latency " +
          std::to_string(target_latency));
    }
  }

  SearchResult result;
  result.best_fitness_per_generation.reserve(params.generations);

  for (int gen = 0; gen < params.generations; ++gen) {
    std::stable_sort(population.begin(), population.end(),
                     [](const Member& a, const Member& b) { return a.fitness > b.fitness; });
    result.best_fitness_per_generation.push_back(population.front().fitness);

    const std::size_t elite_n =
        std::min<std::size_t>(ceil_frac(params.population, params.elite_fraction),
                              params.population);
    const std::size_t parent_n =
        std::min<std::size_t>(ceil_frac(params.population, params.parent_fraction),
                              params.population);

    std::vector<Member> next(population.begin(),
                             population.begin() + static_cast<std::ptrdiff_t>(elite_n));
    next.reserve(params.population);

    auto pick_parent = [&]() -> const Member& {
      return population[uniform_below(rng, parent_n)];
    };

    while (next.size() < static_cast<std::size_t>(params.population)) {
      std::optional<ArchConfig> child;
      for (int attempt = 0; attempt < 100 && !child; ++attempt) {
        ArchConfig candidate;
        if (uniform_unit(rng) < params.crossover_fraction) {
          // Two distinct parents when the parent pool allows it.
          const std::size_t i = uniform_below(rng, parent_n);
          std::size_t j = i;
          if (parent_n >= 2) {
            j = uniform_below(rng, parent_n - 1);
            if (j >= i) ++j;
          }
          candidate = uniform_crossover(population[i].config, population[j].config, rng);
        } else {
          candidate = mutate(pick_parent().config, params.mutation_prob, rng);
        }
        if (latency(candidate) <= target_latency) child = candidate;
      }
      if (!child) child = random_feasible(10000);
      if (!child) child = population.front().config;  // known feasible
      const double lat = latency(*child);
      auto [id, fit] = lookup(*child, lat);
      next.push_back(Member{*child, id, fit});
    }
    population = std::move(next);
  }

  // Final ranking over everything evaluated during the run; fitness ties
  // break on id so the result is independent of hash-map iteration order.
  std::vector<std::pair<std::uint64_t, const Known*>> ranked;
  ranked.reserve(seen.size());
  for (const auto& [id, known] : seen) ranked.emplace_back(id, &known);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second->fitness != b.second->fitness) return a.second->fitness > b.second->fitness;
    return a.first < b.first;
  });
  const std::size_t keep = std::min<std::size_t>(top_k, ranked.size());
  result.entries.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    result.entries.push_back(SearchEntry{ranked[i].second->config, ranked[i].second->fitness,
                                         ranked[i].second->latency});
  }
  result.distinct_evaluated = seen.size();
  result.fitness_calls = fitness_calls;
  return result;
}

}  // namespace archbench
