#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metroplan/city.hpp"
#include "metroplan/features.hpp"
#include "metroplan/graph.hpp"
#include "metroplan/metro.hpp"

namespace metroplan {

struct EnvConfig {
  double budget = 50000.0;       // B, million RMB
  int initial_lines = 4;         // IL
  int max_new_lines = 3;         // ML
  int initial_line_length = 8;   // stations per synthesized initial line
  double t3 = 0.5;               // minimum station spacing, km
  double t4 = 3.0;               // maximum station spacing, km
  double angle_min = 90.0;       // degrees, smallest allowed bend angle
  double alpha = 1.0;            // weight of the OD reward term
  double beta = 0.0;             // weight of the equity reward term
  bool strict_appendix = false;  // forbid selecting existing stations
  OdPairs od_pairs = OdPairs::Connected;
  // New lines must start within t4 of some station (as well as >= t3 from
  // all of them). When false only the spacing floor applies.
  bool new_line_proximity = true;
  CostModel costs;
  std::uint64_t init_seed = 0;   // seed for initial-line synthesis

  // Throws ConfigError on invalid values.
  void validate() const;
};

enum class ActionMode { Extend, NewLine };
std::string to_string(ActionMode mode);
ActionMode action_mode_from_string(const std::string& name);

struct Extension {
  int node = 0;
  int line_id = 0;
  LineEnd end = LineEnd::Back;
  double cost = 0.0;
  bool operator==(const Extension&) const = default;
};

// How a masked-in node is executed.
struct Resolution {
  ActionMode mode = ActionMode::Extend;
  int line_id = -1;  // new line id for NewLine
  LineEnd end = LineEnd::Back;
  double cost = 0.0;
};

struct ActionMask {
  std::vector<std::uint8_t> allowed;     // one entry per region
  std::vector<Resolution> resolution;   // meaningful where allowed
  std::size_t count() const;
  bool any() const { return count() > 0; }
  std::vector<int> nodes() const;        // allowed nodes, ascending
};

// True when the bend at `terminal` between the existing segment towards
// `subterminal` and the new segment towards `node` is within
// [angle_min, 180] degrees.
bool bend_ok(const City& city, int node, int terminal, int subterminal, double angle_min_deg);

// The set of (node, line, end) triples that can extend a line within budget.
// Sorted by node, then line id, then end.
std::vector<Extension> feasible_extensions(const MetroState& state, const City& city, const EnvConfig& config);

// Nodes that may start a new line within budget and line quota, ascending.
std::vector<int> feasible_new_starts(const MetroState& state, const City& city, const EnvConfig& config);

// Union of both sets. Extension wins over a new line; among extensions the
// cheapest wins, ties broken by lowest line id and then lowest end index.
ActionMask action_mask(const MetroState& state, const City& city, const EnvConfig& config);

// Executes node under its resolution. Throws InvalidAction if it is masked
// out.
MetroState apply_action(const MetroState& state, int node, const ActionMask& mask);

// Initial network: the city's own initial lines if it carries any, otherwise
// `initial_lines` synthesized lines grown greedily by total OD flow from
// high-population seeds. Throws ConfigError when they cannot be placed.
MetroState initial_state(const City& city, const EnvConfig& config, std::uint64_t seed);

struct StepInfo {
  double delta_cod = 0.0;  // C_od(M_t) - C_od(M_{t-1})
  double delta_ie = 0.0;   // IE(M_t) - IE(M_{t-1})
  ActionMode mode = ActionMode::Extend;
  int line_id = -1;
  LineEnd end = LineEnd::Back;
  double cost = 0.0;
};

struct StepOutcome {
  MetroState next_state;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// Power of two at or above the total symmetrized flow; rewards are divided
// by it, which keeps sum(rewards) * scale exactly equal to the C_od gain.
double reward_scale_for(const City& city);

// One episode at a time over a shared, read-only city and graph (both must
// outlive the environment).
class Environment {
 public:
  Environment(const City& city, const HeteroGraph& graph, EnvConfig config);

  const MetroState& reset();  // uses config.init_seed
  const MetroState& reset(std::uint64_t seed);
  // Throws InvalidAction for a masked-out node.
  StepOutcome step(int node);

  const MetroState& state() const { return state_; }
  const ActionMask& mask() const { return mask_; }
  bool done() const { return !mask_.any(); }
  FeatureMatrix features() const { return node_features(*city_, *graph_, state_); }

  double cod() const { return cod_; }
  double ie() const { return ie_; }
  double initial_cod() const { return cod0_; }
  double initial_ie() const { return ie0_; }
  double spend() const { return config_.budget - state_.budget_remaining; }
  double reward_scale() const { return reward_scale_; }
  double total_flow() const { return total_flow_; }

  const City& city() const { return *city_; }
  const HeteroGraph& graph() const { return *graph_; }
  const EnvConfig& config() const { return config_; }

 private:
  const City* city_;
  const HeteroGraph* graph_;
  EnvConfig config_;
  MetroState state_;
  ActionMask mask_;
  double cod_ = 0.0, ie_ = 0.0, cod0_ = 0.0, ie0_ = 0.0;
  double reward_scale_ = 1.0, ie_scale_ = 1.0, total_flow_ = 0.0;
  double od_return_ = 0.0, ie_return_ = 0.0;  // running reward sums
};

}  // namespace metroplan
