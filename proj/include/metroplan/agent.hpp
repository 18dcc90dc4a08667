#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "metroplan/env.hpp"
#include "metroplan/graph.hpp"
#include "metroplan/nn/tape.hpp"
#include "metroplan/random.hpp"

namespace metroplan {

// How the policy restricts its output distribution.
//   Feasible:  exactly the env's action mask.
//   Adjacency: the action mask further limited to nodes spatially adjacent
//              to the current network, falling back to the plain mask when
//              that leaves nothing.
enum class PolicyMask { Feasible, Adjacency };
std::string to_string(PolicyMask mode);
PolicyMask policy_mask_from_string(const std::string& name);

struct AgentConfig {
  std::size_t feature_dim = 0;  // width of the node feature rows
  int hidden_dim = 32;          // GNN node dimension
  int layers = 2;               // message-passing layers
  int heads = 2;                // attention heads; hidden_dim % heads == 0
  int policy_hidden = 32;       // MLP_p hidden width
  int value_hidden = 32;        // MLP_v hidden width (two hidden layers)
  PolicyMask policy_mask = PolicyMask::Feasible;

  // Throws ConfigError for non-positive sizes or indivisible heads.
  void validate() const;
  bool operator==(const AgentConfig&) const = default;
};

// Parameter names, in checkpoint order:
//   encoder.input.weight                     feature_dim x d
//   encoder.layer{l}.spatial.weight          d x d
//   encoder.layer{l}.flow.weight             d x d
//   encoder.layer{l}.combine.weight          2d x d
//   policy.attention.head{h}.query.weight    d x d/heads
//   policy.attention.head{h}.key.weight      d x d/heads
//   policy.attention.merge.weight / .bias    d x d, 1 x d
//   policy.mlp.0.weight / .bias              d x p, 1 x p
//   policy.mlp.1.weight                      p x 1
//   value.mlp.0.weight / .bias               (d + 2) x v, 1 x v
//   value.mlp.1.weight / .bias               v x v, 1 x v
//   value.mlp.2.weight / .bias               v x 1, 1 x 1
// The policy's output layer has no bias: a shared offset cancels in the
// softmax.
std::vector<std::string> parameter_manifest(const AgentConfig& config);

// Weights uniform in +-1/sqrt(fan_in), biases zero.
nn::ParameterSet init_agent_params(const AgentConfig& config, std::uint64_t seed);

// Edge lists for message passing, both directions of every undirected edge.
struct GraphIndex {
  std::size_t num_nodes = 0;
  std::vector<int> spatial_src, spatial_dst;
  std::vector<int> flow_src, flow_dst;

  static GraphIndex from(const HeteroGraph& graph);
};

// Everything the agent sees of one state.
struct Observation {
  nn::Matrix features;                // k x feature_dim, normalized
  std::vector<int> stations;          // current station set, ascending
  std::vector<std::uint8_t> mask;     // env action mask
  double budget_fraction = 0.0;       // b_t / B
  double lines_fraction = 0.0;        // l_t / ML, 0 when ML = 0
};

Observation observe(const Environment& env);
Observation observe(const MetroState& state, const ActionMask& mask, const City& city, const HeteroGraph& graph,
                    const EnvConfig& config);

// Node representations per the residual heterogeneous message passing:
//   h0 = A W_A
//   h_s = sum over spatial neighbours of h_j W_s, h_o likewise over flow edges
//   h' = tanh((h_s || h_o) W_c + h)
nn::Var encode(nn::Tape& tape, std::span<const nn::Var> params, const AgentConfig& config, const GraphIndex& graph,
               const nn::Matrix& features);

// Row vector (1 x k) of log-probabilities: multi-head attention of every node
// over the station nodes, residual tanh, MLP_p scores, masked log-softmax.
// Throws InvalidState for an empty mask or an empty station set.
nn::Var score_actions(nn::Tape& tape, std::span<const nn::Var> params, const AgentConfig& config,
                      const GraphIndex& graph, nn::Var embeddings, const Observation& obs);

// 1 x 1 state value from the mean-pooled embeddings and the budget / line
// fractions.
nn::Var state_value(nn::Tape& tape, std::span<const nn::Var> params, const AgentConfig& config, nn::Var embeddings,
                    const Observation& obs);

// The mask the policy applies for this observation (see PolicyMask).
std::vector<std::uint8_t> policy_mask(const AgentConfig& config, const GraphIndex& graph, const Observation& obs);

// Attention weights of head h (k x |V|), for inspection.
nn::Matrix attention_weights(const nn::ParameterSet& params, const AgentConfig& config, const GraphIndex& graph,
                             const Observation& obs, int head);

struct PolicyOutput {
  std::vector<double> log_probs;  // one per region
  double value = 0.0;
  nn::Matrix embeddings;
};

// Forward pass on a scratch tape.
PolicyOutput evaluate_policy(const nn::ParameterSet& params, const AgentConfig& config, const GraphIndex& graph,
                             const Observation& obs);

struct ActionSample {
  int node = -1;
  double log_prob = 0.0;
  double entropy = 0.0;
};

// Categorical draw over entries with nonzero probability; greedy takes the
// argmax with the lowest index on ties.
ActionSample sample_action(std::span<const double> log_probs, Rng& rng, bool greedy = false);

}  // namespace metroplan
