#include "metroplan/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "metroplan/error.hpp"

namespace metroplan {

using nn::Matrix;
using nn::Var;

std::string to_string(PolicyMask mode) { return mode == PolicyMask::Feasible ? "feasible" : "adjacency"; }

PolicyMask policy_mask_from_string(const std::string& name) {
  if (name == "feasible") return PolicyMask::Feasible;
  if (name == "adjacency") return PolicyMask::Adjacency;
  throw ConfigError("policy_mask must be 'feasible' or 'adjacency', got '" + name + "'");
}

void AgentConfig::validate() const {
  if (feature_dim == 0) throw ConfigError("agent.feature_dim must be positive");
  if (hidden_dim <= 0) throw ConfigError("agent.hidden_dim must be positive");
  if (layers < 0) throw ConfigError("agent.layers must be >= 0");
  if (heads <= 0) throw ConfigError("agent.heads must be positive");
  if (hidden_dim % heads != 0)
    throw ConfigError("agent.hidden_dim (" + std::to_string(hidden_dim) + ") must be divisible by agent.heads (" +
                      std::to_string(heads) + ")");
  if (policy_hidden <= 0) throw ConfigError("agent.policy_hidden must be positive");
  if (value_hidden <= 0) throw ConfigError("agent.value_hidden must be positive");
}

namespace {

struct Shape {
  std::string name;
  std::size_t rows, cols;
  bool bias;
};

std::vector<Shape> shapes(const AgentConfig& c) {
  const auto d = static_cast<std::size_t>(c.hidden_dim);
  const auto dh = d / static_cast<std::size_t>(c.heads);
  const auto p = static_cast<std::size_t>(c.policy_hidden);
  const auto v = static_cast<std::size_t>(c.value_hidden);
  std::vector<Shape> s;
  s.push_back({"encoder.input.weight", c.feature_dim, d, false});
  for (int l = 0; l < c.layers; ++l) {
    const std::string pre = "encoder.layer" + std::to_string(l) + ".";
    s.push_back({pre + "spatial.weight", d, d, false});
    s.push_back({pre + "flow.weight", d, d, false});
    s.push_back({pre + "combine.weight", 2 * d, d, false});
  }
  for (int h = 0; h < c.heads; ++h) {
    const std::string pre = "policy.attention.head" + std::to_string(h) + ".";
    s.push_back({pre + "query.weight", d, dh, false});
    s.push_back({pre + "key.weight", d, dh, false});
  }
  s.push_back({"policy.attention.merge.weight", d, d, false});
  s.push_back({"policy.attention.merge.bias", 1, d, true});
  s.push_back({"policy.mlp.0.weight", d, p, false});
  s.push_back({"policy.mlp.0.bias", 1, p, true});
  s.push_back({"policy.mlp.1.weight", p, 1, false});
  s.push_back({"value.mlp.0.weight", d + 2, v, false});
  s.push_back({"value.mlp.0.bias", 1, v, true});
  s.push_back({"value.mlp.1.weight", v, v, false});
  s.push_back({"value.mlp.1.bias", 1, v, true});
  s.push_back({"value.mlp.2.weight", v, 1, false});
  s.push_back({"value.mlp.2.bias", 1, 1, true});
  return s;
}

// Positions of each parameter in the manifest order.
struct Layout {
  std::size_t input;
  std::size_t layer0;      // 3 per layer: spatial, flow, combine
  std::size_t heads0;      // 2 per head: query, key
  std::size_t merge_w, merge_b, p0_w, p0_b, p1_w;
  std::size_t v0_w, v0_b, v1_w, v1_b, v2_w, v2_b;
  std::size_t total;

  explicit Layout(const AgentConfig& c) {
    std::size_t i = 0;
    input = i++;
    layer0 = i;
    i += 3 * static_cast<std::size_t>(c.layers);
    heads0 = i;
    i += 2 * static_cast<std::size_t>(c.heads);
    merge_w = i++;
    merge_b = i++;
    p0_w = i++;
    p0_b = i++;
    p1_w = i++;
    v0_w = i++;
    v0_b = i++;
    v1_w = i++;
    v1_b = i++;
    v2_w = i++;
    v2_b = i++;
    total = i;
  }
};

void check_params(std::span<const Var> params, const Layout& layout) {
  if (params.size() != layout.total)
    throw InvalidArgument("agent: expected " + std::to_string(layout.total) + " parameters, got " +
                          std::to_string(params.size()));
}

}  // namespace

std::vector<std::string> parameter_manifest(const AgentConfig& config) {
  std::vector<std::string> names;
  for (const auto& s : shapes(config)) names.push_back(s.name);
  return names;
}

nn::ParameterSet init_agent_params(const AgentConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  nn::ParameterSet set;
  for (const auto& s : shapes(config)) {
    Matrix m(s.rows, s.cols);
    if (!s.bias) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(s.rows));
      for (auto& x : m.data()) x = rng.uniform(-bound, bound);
    }
    set.add(s.name, std::move(m));
  }
  return set;
}

GraphIndex GraphIndex::from(const HeteroGraph& graph) {
  GraphIndex g;
  g.num_nodes = graph.num_nodes;
  for (const auto& [i, j] : graph.spatial_edges) {
    g.spatial_src.push_back(i);
    g.spatial_dst.push_back(j);
    g.spatial_src.push_back(j);
    g.spatial_dst.push_back(i);
  }
  for (const auto& [i, j] : graph.flow_edges) {
    g.flow_src.push_back(i);
    g.flow_dst.push_back(j);
    g.flow_src.push_back(j);
    g.flow_dst.push_back(i);
  }
  return g;
}

Observation observe(const MetroState& state, const ActionMask& mask, const City& city, const HeteroGraph& graph,
                    const EnvConfig& config) {
  Observation obs;
  const FeatureMatrix f = node_features(city, graph, state);
  obs.features = Matrix(f.rows, f.cols, f.values);
  obs.stations = state.stations();
  obs.mask = mask.allowed;
  obs.budget_fraction = config.budget > 0 ? state.budget_remaining / config.budget : 0.0;
  obs.lines_fraction =
      config.max_new_lines > 0 ? static_cast<double>(state.new_lines_remaining) / config.max_new_lines : 0.0;
  return obs;
}

Observation observe(const Environment& env) {
  return observe(env.state(), env.mask(), env.city(), env.graph(), env.config());
}

Var encode(nn::Tape& tape, std::span<const Var> params, const AgentConfig& config, const GraphIndex& graph,
           const Matrix& features) {
  const Layout layout(config);
  check_params(params, layout);
  if (features.rows() != graph.num_nodes || features.cols() != config.feature_dim)
    throw InvalidArgument("encode: features " + features.shape() + " for " + std::to_string(graph.num_nodes) +
                          " nodes and feature_dim " + std::to_string(config.feature_dim));
  Var h = nn::matmul(tape.constant(features), params[layout.input]);
  for (int l = 0; l < config.layers; ++l) {
    const std::size_t base = layout.layer0 + 3 * static_cast<std::size_t>(l);
    Var hs = nn::matmul(nn::segment_sum(h, graph.spatial_src, graph.spatial_dst, graph.num_nodes), params[base]);
    Var ho = nn::matmul(nn::segment_sum(h, graph.flow_src, graph.flow_dst, graph.num_nodes), params[base + 1]);
    Var mixed = nn::matmul(nn::concat_cols(hs, ho), params[base + 2]);
    h = nn::tanh(nn::add(mixed, h));
  }
  return h;
}

std::vector<std::uint8_t> policy_mask(const AgentConfig& config, const GraphIndex& graph, const Observation& obs) {
  if (config.policy_mask == PolicyMask::Feasible) return obs.mask;
  std::vector<std::uint8_t> near(graph.num_nodes, 0);
  std::vector<std::uint8_t> is_station(graph.num_nodes, 0);
  for (int s : obs.stations) is_station[static_cast<std::size_t>(s)] = 1;
  for (std::size_t e = 0; e < graph.spatial_src.size(); ++e)
    if (is_station[static_cast<std::size_t>(graph.spatial_src[e])])
      near[static_cast<std::size_t>(graph.spatial_dst[e])] = 1;
  std::vector<std::uint8_t> out(obs.mask.size(), 0);
  bool any = false;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = obs.mask[i] && near[i];
    any = any || out[i];
  }
  return any ? out : obs.mask;
}

namespace {

// Context vectors from every head, concatenated (k x d).
Var attend(std::span<const Var> params, const AgentConfig& config, const Layout& layout, Var h,
           const Observation& obs, std::vector<Var>* weights) {
  const auto d = static_cast<std::size_t>(config.hidden_dim);
  const auto dh = d / static_cast<std::size_t>(config.heads);
  Var hv = nn::gather_rows(h, obs.stations);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> ctx;
  for (int head = 0; head < config.heads; ++head) {
    const std::size_t base = layout.heads0 + 2 * static_cast<std::size_t>(head);
    Var q = nn::matmul(h, params[base]);
    Var k = nn::matmul(hv, params[base + 1]);
    Var w = nn::softmax_rows(nn::scale(nn::matmul_transposed(q, k), inv_sqrt));
    if (weights) weights->push_back(w);
    const std::size_t begin = static_cast<std::size_t>(head) * dh;
    ctx.push_back(nn::matmul(w, nn::slice_cols(hv, begin, begin + dh)));
  }
  return nn::concat_cols(ctx);
}

}  // namespace

Var score_actions(nn::Tape& tape, std::span<const Var> params, const AgentConfig& config, const GraphIndex& graph,
                  Var embeddings, const Observation& obs) {
  (void)tape;
  const Layout layout(config);
  check_params(params, layout);
  if (obs.stations.empty()) throw InvalidState("score_actions: the network has no stations to attend to");
  if (obs.mask.size() != graph.num_nodes)
    throw InvalidArgument("score_actions: mask has " + std::to_string(obs.mask.size()) + " entries for " +
                          std::to_string(graph.num_nodes) + " nodes");
  const auto mask = policy_mask(config, graph, obs);
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }))
    throw InvalidState("score_actions: no feasible action");

  Var ctx = attend(params, config, layout, embeddings, obs, nullptr);
  Var merged = nn::add_row(nn::matmul(ctx, params[layout.merge_w]), params[layout.merge_b]);
  Var a = nn::tanh(nn::add(merged, embeddings));
  Var hidden = nn::tanh(nn::add_row(nn::matmul(a, params[layout.p0_w]), params[layout.p0_b]));
  Var scores = nn::transpose(nn::matmul(hidden, params[layout.p1_w]));
  return nn::masked_log_softmax(scores, mask);
}

Var state_value(nn::Tape& tape, std::span<const Var> params, const AgentConfig& config, Var embeddings,
                const Observation& obs) {
  const Layout layout(config);
  check_params(params, layout);
  Var extra = tape.constant(Matrix(1, 2, std::vector<double>{obs.budget_fraction, obs.lines_fraction}));
  Var z = nn::concat_cols(nn::mean_pool(embeddings), extra);
  z = nn::tanh(nn::add_row(nn::matmul(z, params[layout.v0_w]), params[layout.v0_b]));
  z = nn::tanh(nn::add_row(nn::matmul(z, params[layout.v1_w]), params[layout.v1_b]));
  return nn::add_row(nn::matmul(z, params[layout.v2_w]), params[layout.v2_b]);
}

Matrix attention_weights(const nn::ParameterSet& params, const AgentConfig& config, const GraphIndex& graph,
                         const Observation& obs, int head) {
  if (head < 0 || head >= config.heads) throw InvalidArgument("attention_weights: head out of range");
  if (obs.stations.empty()) throw InvalidState("attention_weights: the network has no stations");
  const Layout layout(config);
  nn::Tape tape;
  const auto vars = tape.parameters(params);
  Var h = encode(tape, vars, config, graph, obs.features);
  std::vector<Var> weights;
  attend(vars, config, layout, h, obs, &weights);
  return weights[static_cast<std::size_t>(head)].value();
}

PolicyOutput evaluate_policy(const nn::ParameterSet& params, const AgentConfig& config, const GraphIndex& graph,
                             const Observation& obs) {
  nn::Tape tape;
  const auto vars = tape.parameters(params);
  Var h = encode(tape, vars, config, graph, obs.features);
  Var lp = score_actions(tape, vars, config, graph, h, obs);
  Var v = state_value(tape, vars, config, h, obs);
  return {lp.value().values(), v.scalar(), h.value()};
}

ActionSample sample_action(std::span<const double> log_probs, Rng& rng, bool greedy) {
  // Masked entries sit near -1e30; anything that far down has probability 0.
  constexpr double kFloor = nn::kMaskedLogit / 2;
  std::vector<double> probs(log_probs.size(), 0.0);
  double entropy = 0.0;
  int best = -1;
  for (std::size_t i = 0; i < log_probs.size(); ++i) {
    if (log_probs[i] <= kFloor) continue;
    probs[i] = std::exp(log_probs[i]);
    if (probs[i] > 0) entropy -= probs[i] * log_probs[i];
    if (best < 0 || log_probs[i] > log_probs[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  if (best < 0) throw InvalidState("sample_action: no action with nonzero probability");
  const int node = greedy ? best : static_cast<int>(rng.categorical(probs));
  return {node, log_probs[static_cast<std::size_t>(node)], entropy == 0.0 ? 0.0 : entropy};
}

}  // namespace metroplan
