#pragma once

#include <functional>
#include <vector>

#include "metroplan/env.hpp"

namespace metroplan {

struct OracleResult {
  std::vector<int> actions;  // optimal sequence; lexicographically smallest on ties
  double value = 0.0;        // C_od of the final network
  MetroState final_state;
  std::size_t leaves = 0;    // complete sequences evaluated
  double estimate = 0.0;     // size estimate the guard checked
};

inline constexpr double kDefaultOracleGuard = 1e6;

// Upper estimate of the enumeration size: m0^D, where m0 is the initial
// number of masked-in nodes and D the number of actions the budget (or
// depth_limit) can afford.
double oracle_size_estimate(const City& city, const EnvConfig& config, int depth_limit);

// Exhaustive depth-first search over action sequences from the initial
// state. A leaf is an episode that is done or has reached depth_limit.
// Returns the leaf maximizing final C_od. Throws GuardRefusal when the
// estimate exceeds guard, or when the walk visits more than 10x guard leaves.
// on_leaf, when set, receives every leaf's action sequence and value.
OracleResult enumerate_episodes(const City& city, const EnvConfig& config, int depth_limit,
                                double guard = kDefaultOracleGuard,
                                const std::function<void(const std::vector<int>&, double)>& on_leaf = {});

}  // namespace metroplan
