#include "metroplan/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "metroplan/error.hpp"
#include "metroplan/random.hpp"

namespace metroplan {

void EnvConfig::validate() const {
  if (!(budget > 0.0)) throw ConfigError("env.budget must be > 0");
  if (initial_lines < 1) throw ConfigError("env.initial_lines must be >= 1");
  if (max_new_lines < 0) throw ConfigError("env.max_new_lines must be >= 0");
  if (initial_line_length < 1) throw ConfigError("env.initial_line_length must be >= 1");
  if (!(t3 > 0.0) || !(t4 > t3)) throw ConfigError("env spacing requires 0 < t3 < t4");
  if (!(angle_min >= 0.0) || !(angle_min <= 180.0)) throw ConfigError("env.angle_min must be in [0, 180]");
  if (!(alpha >= 0.0) || !(beta >= 0.0) || std::abs(alpha + beta - 1.0) > 1e-9)
    throw ConfigError("env reward weights need alpha, beta >= 0 and alpha + beta = 1");
  costs.validate();
}

std::string to_string(ActionMode mode) { return mode == ActionMode::Extend ? "extend" : "new_line"; }

ActionMode action_mode_from_string(const std::string& name) {
  if (name == "extend") return ActionMode::Extend;
  if (name == "new_line") return ActionMode::NewLine;
  throw ParseError("unknown action mode '" + name + "'");
}

std::size_t ActionMask::count() const {
  return static_cast<std::size_t>(std::count(allowed.begin(), allowed.end(), std::uint8_t{1}));
}

std::vector<int> ActionMask::nodes() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < allowed.size(); ++i)
    if (allowed[i]) out.push_back(static_cast<int>(i));
  return out;
}

bool bend_ok(const City& city, int node, int terminal, int subterminal, double angle_min_deg) {
  const Region& n = city.region(node);
  const Region& t = city.region(terminal);
  const Region& s = city.region(subterminal);
  const double ux = n.x_km - t.x_km, uy = n.y_km - t.y_km;
  const double vx = s.x_km - t.x_km, vy = s.y_km - t.y_km;
  const double dot = ux * vx + uy * vy;
  const double norms = std::hypot(ux, uy) * std::hypot(vx, vy);
  if (norms == 0.0) return false;
  return dot <= std::cos(angle_min_deg * std::numbers::pi / 180.0) * norms;
}

namespace {

bool spacing_ok(double d, const EnvConfig& config) { return d >= config.t3 && d <= config.t4; }

}  // namespace

std::vector<Extension> feasible_extensions(const MetroState& state, const City& city, const EnvConfig& config) {
  std::vector<Extension> out;
  const int k = static_cast<int>(city.size());
  for (const MetroLine& line : state.lines) {
    const bool single = line.stations.size() == 1;
    for (LineEnd end : {LineEnd::Front, LineEnd::Back}) {
      if (single && end == LineEnd::Front) continue;  // both ends coincide
      const std::size_t n = line.stations.size();
      const int terminal = end == LineEnd::Front ? line.stations[0] : line.stations[n - 1];
      const int sub = single ? -1 : (end == LineEnd::Front ? line.stations[1] : line.stations[n - 2]);
      for (int node = 0; node < k; ++node) {
        if (line.contains(node)) continue;
        if (config.strict_appendix && state.is_station(node)) continue;
        if (!spacing_ok(city.distance(node, terminal), config)) continue;
        if (sub >= 0 && !bend_ok(city, node, terminal, sub, config.angle_min)) continue;
        const double cost = extension_cost(state, line.line_id, end, node, city, config.costs);
        if (cost > state.budget_remaining) continue;
        out.push_back({node, line.line_id, end, cost});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Extension& a, const Extension& b) {
    if (a.node != b.node) return a.node < b.node;
    if (a.line_id != b.line_id) return a.line_id < b.line_id;
    return a.end < b.end;
  });
  return out;
}

std::vector<int> feasible_new_starts(const MetroState& state, const City& city, const EnvConfig& config) {
  std::vector<int> out;
  if (state.new_lines_remaining <= 0) return out;
  const std::vector<int> stations = state.stations();
  const int k = static_cast<int>(city.size());
  for (int node = 0; node < k; ++node) {
    bool far_from_all = true;
    bool near_some = false;
    for (int s : stations) {
      const double d = city.distance(node, s);
      if (d < config.t3) far_from_all = false;
      if (d <= config.t4) near_some = true;
    }
    if (!far_from_all) continue;
    if (config.new_line_proximity && !near_some) continue;
    if (new_line_cost(state, node, city, config.costs) > state.budget_remaining) continue;
    out.push_back(node);
  }
  return out;
}

ActionMask action_mask(const MetroState& state, const City& city, const EnvConfig& config) {
  ActionMask mask;
  mask.allowed.assign(city.size(), 0);
  mask.resolution.assign(city.size(), Resolution{});
  // Extensions arrive sorted by (node, line, end): the first strictly
  // cheaper one per node wins.
  for (const Extension& e : feasible_extensions(state, city, config)) {
    auto idx = static_cast<std::size_t>(e.node);
    if (!mask.allowed[idx] || e.cost < mask.resolution[idx].cost) {
      mask.allowed[idx] = 1;
      mask.resolution[idx] = {ActionMode::Extend, e.line_id, e.end, e.cost};
    }
  }
  int next_line_id = 0;
  for (const MetroLine& l : state.lines) next_line_id = std::max(next_line_id, l.line_id + 1);
  for (int node : feasible_new_starts(state, city, config)) {
    auto idx = static_cast<std::size_t>(node);
    if (mask.allowed[idx]) continue;
    mask.allowed[idx] = 1;
    mask.resolution[idx] = {ActionMode::NewLine, next_line_id, LineEnd::Back,
                            new_line_cost(state, node, city, config.costs)};
  }
  return mask;
}

MetroState apply_action(const MetroState& state, int node, const ActionMask& mask) {
  if (node < 0 || static_cast<std::size_t>(node) >= mask.allowed.size() || !mask.allowed[static_cast<std::size_t>(node)])
    throw InvalidAction("node " + std::to_string(node) + " is masked out");
  const Resolution& r = mask.resolution[static_cast<std::size_t>(node)];
  MetroState next = state;
  if (r.mode == ActionMode::Extend) {
    MetroLine& line = next.line(r.line_id);
    if (r.end == LineEnd::Front)
      line.stations.insert(line.stations.begin(), node);
    else
      line.stations.push_back(node);
  } else {
    next.lines.push_back(MetroLine{r.line_id, {node}});
    --next.new_lines_remaining;
  }
  next.budget_remaining -= r.cost;
  // Guard against a rounding residue below zero when the cost equals b_t.
  if (next.budget_remaining < 0.0) next.budget_remaining = 0.0;
  return next;
}

namespace {

std::vector<int> grow_line(const City& city, const EnvConfig& config, int start, const std::vector<bool>& used,
                           const std::vector<double>& access) {
  std::vector<int> line{start};
  const int k = static_cast<int>(city.size());
  while (static_cast<int>(line.size()) < config.initial_line_length) {
    const int terminal = line.back();
    const int sub = line.size() >= 2 ? line[line.size() - 2] : -1;
    int best = -1;
    for (int c = 0; c < k; ++c) {
      if (used[static_cast<std::size_t>(c)] || std::find(line.begin(), line.end(), c) != line.end()) continue;
      if (!spacing_ok(city.distance(c, terminal), config)) continue;
      if (sub >= 0 && !bend_ok(city, c, terminal, sub, config.angle_min)) continue;
      if (best < 0 || access[static_cast<std::size_t>(c)] > access[static_cast<std::size_t>(best)]) best = c;
    }
    if (best < 0) return {};
    line.push_back(best);
  }
  return line;
}

}  // namespace

MetroState initial_state(const City& city, const EnvConfig& config, std::uint64_t seed) {
  config.validate();
  MetroState state;
  state.budget_remaining = config.budget;
  state.new_lines_remaining = config.max_new_lines;

  if (!city.initial_lines().empty()) {
    for (std::size_t l = 0; l < city.initial_lines().size(); ++l)
      state.lines.push_back(MetroLine{static_cast<int>(l), city.initial_lines()[l]});
    return state;
  }

  const int k = static_cast<int>(city.size());
  std::vector<double> access(city.size(), 0.0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) access[static_cast<std::size_t>(i)] += city.symmetric_flow(i, j);
  std::vector<int> by_population(city.size());
  for (int i = 0; i < k; ++i) by_population[static_cast<std::size_t>(i)] = i;
  std::stable_sort(by_population.begin(), by_population.end(),
                   [&](int a, int b) { return city.region(a).population > city.region(b).population; });

  Rng rng(mix_seed(seed, 0x1a17));
  std::vector<bool> used(city.size(), false);
  for (int l = 0; l < config.initial_lines; ++l) {
    std::vector<int> candidates;
    for (int r : by_population)
      if (!used[static_cast<std::size_t>(r)]) candidates.push_back(r);
    if (candidates.empty()) break;
    const std::size_t offset = rng.index(std::min<std::size_t>(3, candidates.size()));
    std::vector<int> line;
    for (std::size_t t = 0; t < candidates.size() && line.empty(); ++t)
      line = grow_line(city, config, candidates[(offset + t) % candidates.size()], used, access);
    if (line.empty())
      throw ConfigError("cannot synthesize " + std::to_string(config.initial_lines) + " non-overlapping initial lines of " +
                        std::to_string(config.initial_line_length) + " stations (placed " + std::to_string(l) + ")");
    for (int s : line) used[static_cast<std::size_t>(s)] = true;
    state.lines.push_back(MetroLine{l, std::move(line)});
  }
  if (static_cast<int>(state.lines.size()) != config.initial_lines)
    throw ConfigError("cannot synthesize " + std::to_string(config.initial_lines) + " initial lines");
  return state;
}

double reward_scale_for(const City& city) {
  const double total = city.total_flow();
  if (!(total > 0.0)) return 1.0;
  return std::exp2(std::ceil(std::log2(total)));
}

namespace {

// Returns r such that running + r == target in double arithmetic, so that
// sequential sums of emitted rewards reproduce the potential exactly.
double telescoping_increment(double running, double target) {
  double r = target - running;
  for (int i = 0; i < 64 && running + r != target; ++i)
    r = std::nextafter(r, running + r < target ? std::numeric_limits<double>::infinity()
                                               : -std::numeric_limits<double>::infinity());
  return r;
}

}  // namespace

Environment::Environment(const City& city, const HeteroGraph& graph, EnvConfig config)
    : city_(&city), graph_(&graph), config_(std::move(config)) {
  config_.validate();
  reward_scale_ = reward_scale_for(city);
  total_flow_ = city.total_flow();
}

const MetroState& Environment::reset() { return reset(config_.init_seed); }

const MetroState& Environment::reset(std::uint64_t seed) {
  state_ = initial_state(*city_, config_, seed);
  mask_ = action_mask(state_, *city_, config_);
  cod_ = cod0_ = satisfied_od(state_, *city_, config_.od_pairs);
  ie_ = ie0_ = inequity(state_, *city_);
  ie_scale_ = ie0_ > 0.0 ? ie0_ : 1.0;
  od_return_ = ie_return_ = 0.0;
  return state_;
}

StepOutcome Environment::step(int node) {
  MetroState next = apply_action(state_, node, mask_);
  const Resolution r = mask_.resolution[static_cast<std::size_t>(node)];
  const double cod = satisfied_od(next, *city_, config_.od_pairs);
  const double ie = inequity(next, *city_);

  const double od_gain = telescoping_increment(od_return_, (cod - cod0_) / reward_scale_);
  const double ie_gain = telescoping_increment(ie_return_, (ie0_ - ie) / ie_scale_);
  od_return_ += od_gain;
  ie_return_ += ie_gain;

  StepOutcome out;
  out.reward = config_.alpha * od_gain + config_.beta * ie_gain;
  out.info = {cod - cod_, ie - ie_, r.mode, r.line_id, r.end, r.cost};

  state_ = std::move(next);
  mask_ = action_mask(state_, *city_, config_);
  cod_ = cod;
  ie_ = ie;
  out.next_state = state_;
  out.done = !mask_.any();
  return out;
}

}  // namespace metroplan
