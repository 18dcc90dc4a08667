#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "metroplan/env.hpp"

namespace metroplan {

// A complete episode and its cached outcome.
struct Solution {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<int> actions;
  double cod = 0.0;
  double ie = 0.0;
  double spend = 0.0;
  double objective = 0.0;          // episode return under the config's alpha/beta
  std::size_t evaluations = 0;     // complete episodes evaluated
  std::vector<double> best_trace;  // best objective after each iteration/generation
};

// Replays actions from the reset state. Throws InvalidAction at the first
// masked-out action. The episode need not be finished.
Solution replay(const City& city, const HeteroGraph& graph, const EnvConfig& config, std::span<const int> actions);

// Episode return alpha * (C - C0) / scale + beta * (IE0 - IE) / IE0 of the
// environment's current state.
double episode_objective(const Environment& env);

// Masked-in node with the largest flow exchanged with the current stations
// (FD3); lowest region id on ties.
int greedy_pick(const Environment& env);

Solution greedy(const City& city, const HeteroGraph& graph, const EnvConfig& config);

struct SaConfig {
  double t0 = 1500.0;
  double cooling = 0.98;
  double t_min = 0.1;
  int iters_per_temp = 200;
  // Re-rolled suffixes shorter than this share of the current sequence are
  // rejected without evaluation.
  double min_reroll_fraction = 0.1;
  void validate() const;
};

// Starts from the greedy solution. Neighbour: truncate at a uniform position
// and re-roll the suffix with uniform masked-in actions. Improvements are
// always accepted, others with probability exp(delta / T), delta in percent
// of the initial objective magnitude. Returns the best sequence seen.
Solution simulated_annealing(const City& city, const HeteroGraph& graph, const EnvConfig& config,
                             const SaConfig& sa, std::uint64_t seed);

struct GaConfig {
  int population = 200;
  int max_evaluations = 2000;  // includes the initial population
  double crossover_prob = 0.8;
  double mutation_prob = 0.8;
  int tournament = 4;
  int elitism = 2;
  void validate() const;
};

// Initial population: the greedy solution plus uniform random episodes.
// Crossover keeps a prefix of the first parent (cut uniform on the shorter
// parent), follows the second parent's later actions while they stay
// feasible, then re-rolls. Mutation is SA's truncate-and-re-roll.
Solution genetic(const City& city, const HeteroGraph& graph, const EnvConfig& config, const GaConfig& ga,
                 std::uint64_t seed);

struct AcoConfig {
  int iterations = 100;
  int ants = 128;
  double pheromone_weight = 1.0;  // alpha_p
  double heuristic_weight = 2.0;  // beta_h
  double evaporation = 0.1;       // rho
  double pheromone_floor = 1e-6;
  double initial_pheromone = 1.0;
  void validate() const;
};

// Ants sample masked-in nodes with weight tau^alpha_p * (FD3 + 1)^beta_h.
// After each iteration all entries evaporate and the global best deposits
// its value relative to the greedy solution on every node it selected.
Solution ant_colony(const City& city, const HeteroGraph& graph, const EnvConfig& config, const AcoConfig& aco,
                    std::uint64_t seed);

// One uniform random complete episode.
Solution random_episode(const City& city, const HeteroGraph& graph, const EnvConfig& config, std::uint64_t seed);

enum class BaselineMethod { Greedy, Annealing, Genetic, AntColony };
std::string to_string(BaselineMethod method);             // gs, sa, ga, aco
BaselineMethod baseline_method_from_string(const std::string& name);

}  // namespace metroplan
