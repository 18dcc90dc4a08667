#include "metroplan/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "metroplan/error.hpp"

namespace metroplan {

double oracle_size_estimate(const City& city, const EnvConfig& config, int depth_limit) {
  const MetroState s0 = initial_state(city, config, config.init_seed);
  const double m0 = static_cast<double>(action_mask(s0, city, config).count());
  const CostModel& c = config.costs;
  const double cheapest = std::min(c.station_cost, c.upgrade_cost() + c.per_km_cost * config.t3);
  double depth = std::floor(config.budget / cheapest);
  if (depth_limit >= 0) depth = std::min(depth, static_cast<double>(depth_limit));
  if (m0 <= 1.0) return 1.0;
  return std::pow(m0, depth);
}

namespace {

struct Search {
  const City& city;
  const EnvConfig& config;
  int depth_limit;
  double leaf_cap;
  const std::function<void(const std::vector<int>&, double)>& on_leaf;
  std::vector<int> path;
  OracleResult best;
  bool have_best = false;

  void visit(const MetroState& state) {
    const ActionMask mask = action_mask(state, city, config);
    const bool at_limit = depth_limit >= 0 && static_cast<int>(path.size()) >= depth_limit;
    if (!mask.any() || at_limit) {
      const double value = satisfied_od(state, city, config.od_pairs);
      ++best.leaves;
      if (static_cast<double>(best.leaves) > leaf_cap)
        throw GuardRefusal("oracle: enumeration exceeded " + std::to_string(static_cast<long long>(leaf_cap)) +
                               " leaves",
                           static_cast<double>(best.leaves));
      if (on_leaf) on_leaf(path, value);
      if (!have_best || value > best.value) {
        have_best = true;
        best.value = value;
        best.actions = path;
        best.final_state = state;
      }
      return;
    }
    for (int node : mask.nodes()) {
      path.push_back(node);
      visit(apply_action(state, node, mask));
      path.pop_back();
    }
  }
};

}  // namespace

OracleResult enumerate_episodes(const City& city, const EnvConfig& config, int depth_limit, double guard,
                                const std::function<void(const std::vector<int>&, double)>& on_leaf) {
  const double estimate = oracle_size_estimate(city, config, depth_limit);
  if (estimate > guard) {
    std::ostringstream msg;
    msg << "oracle: refusing instance with estimated " << estimate << " action sequences (guard " << guard << ")";
    throw GuardRefusal(msg.str(), estimate);
  }
  Search search{city, config, depth_limit, 10.0 * guard, on_leaf, {}, {}, false};
  search.visit(initial_state(city, config, config.init_seed));
  search.best.estimate = estimate;
  return search.best;
}

}  // namespace metroplan
