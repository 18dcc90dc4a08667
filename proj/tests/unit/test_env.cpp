#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "brute_force.hpp"
#include "constraints.hpp"
#include "metroplan/baselines.hpp"
#include "metroplan/env.hpp"
#include "metroplan/error.hpp"
#include "metroplan/oracle.hpp"
#include "support.hpp"

using namespace metroplan;
using testing::city_from_points;
using testing::network;

// Frozen reference run: default EnvConfig and graph on generate_city(100, 7).
constexpr double kK100Seed7InitialCod = 57343.694258090152;

namespace {

// Line 0-1 along x, then candidates: 2 straight ahead (1 km), 3 at a 45
// degree bend, 4 far away, 5 right next to a station.
City bend_city() {
  const double r = std::sqrt(0.5);
  return city_from_points({{0, 0}, {1, 0}, {2, 0}, {1 - r, r}, {20, 20}, {1.1, 0}},
                          {{0, 2, 5}, {1, 3, 5}, {0, 4, 5}}, {{0, 1}});
}

EnvConfig small_config(double budget, int quota) {
  EnvConfig cfg;
  cfg.budget = budget;
  cfg.initial_lines = 1;
  cfg.initial_line_length = 2;
  cfg.max_new_lines = quota;
  return cfg;
}

EnvConfig reference_env() {
  EnvConfig cfg;
  cfg.budget = 12000;
  cfg.initial_lines = 1;
  cfg.initial_line_length = 3;
  cfg.t4 = 4.0;
  cfg.max_new_lines = 3;
  return cfg;
}

}  // namespace

TEST_CASE("reset is deterministic and spends nothing") {
  const City c = generate_city(60, 2);
  const HeteroGraph g = build_graph(c);
  EnvConfig cfg;
  cfg.initial_lines = 2;
  cfg.initial_line_length = 5;
  Environment a(c, g, cfg), b(c, g, cfg);
  CHECK(a.reset(3) == b.reset(3));
  CHECK(a.state().lines.size() == 2);
  CHECK(a.state().budget_remaining == cfg.budget);
  CHECK(a.state().new_lines_remaining == cfg.max_new_lines);
  for (const auto& l : a.state().lines) CHECK(l.stations.size() == 5);
}

TEST_CASE("initial lines obey spacing and bends") {
  const City c = generate_city(100, 7);
  EnvConfig cfg;
  const MetroState s = initial_state(c, cfg, 0);
  CHECK(s.lines.size() == 4);
  for (const auto& l : s.lines) {
    CHECK(l.stations.size() == 8);
    for (std::size_t i = 1; i < l.stations.size(); ++i) {
      const double d = c.distance(l.stations[i - 1], l.stations[i]);
      CHECK(d >= cfg.t3);
      CHECK(d <= cfg.t4);
      if (i >= 2) CHECK(testing::bend_degrees(c, l.stations[i], l.stations[i - 1], l.stations[i - 2]) >= 90.0 - 1e-9);
    }
  }
  for (std::size_t a = 0; a < s.lines.size(); ++a)
    for (std::size_t b = a + 1; b < s.lines.size(); ++b)
      for (int v : s.lines[a].stations) CHECK_FALSE(s.lines[b].contains(v));
}

TEST_CASE("k=100 reference initial satisfied OD") {
  const City c = generate_city(100, 7);
  const HeteroGraph g = build_graph(c);
  Environment env(c, g, EnvConfig{});
  env.reset();
  CHECK(env.cod() == kK100Seed7InitialCod);
}

TEST_CASE("initial synthesis fails loudly when lines cannot be placed") {
  const City c = generate_city(6, 0);
  EnvConfig cfg;
  cfg.initial_lines = 4;
  cfg.initial_line_length = 8;
  CHECK_THROWS_AS(initial_state(c, cfg, 0), ConfigError);
}

TEST_CASE("straight extension is feasible, a 45 degree bend is not") {
  const City c = bend_city();
  const EnvConfig cfg = small_config(5000, 0);
  const MetroState s = initial_state(c, cfg, 0);
  CHECK(testing::bend_degrees(c, 3, 1, 0) == doctest::Approx(45.0));
  CHECK(bend_ok(c, 2, 1, 0, 90.0));
  CHECK_FALSE(bend_ok(c, 3, 1, 0, 90.0));
  const auto ext = feasible_extensions(s, c, cfg);
  auto has = [&](int node) {
    return std::any_of(ext.begin(), ext.end(), [&](const Extension& e) { return e.node == node; });
  };
  CHECK(has(2));
  CHECK_FALSE(has(3));
  CHECK_FALSE(has(4));
  CHECK_FALSE(has(5));
  const ActionMask mask = action_mask(s, c, cfg);
  CHECK(mask.allowed[2] == 1);
  CHECK(mask.allowed[3] == 0);
  CHECK(mask.resolution[2].mode == ActionMode::Extend);
  CHECK(mask.resolution[2].end == LineEnd::Back);
  CHECK(mask.resolution[2].cost == doctest::Approx(800.0));
}

TEST_CASE("zero budget leaves nothing feasible") {
  const City c = bend_city();
  MetroState s = initial_state(c, small_config(5000, 2), 0);
  s.budget_remaining = 0.0;
  const EnvConfig cfg = small_config(5000, 2);
  CHECK(feasible_extensions(s, c, cfg).empty());
  CHECK(feasible_new_starts(s, c, cfg).empty());
  CHECK_FALSE(action_mask(s, c, cfg).any());
}

TEST_CASE("new-line starts: quota, spacing floor, proximity") {
  const City c = bend_city();
  EnvConfig cfg = small_config(5000, 1);
  MetroState s = initial_state(c, cfg, 0);
  const auto starts = feasible_new_starts(s, c, cfg);
  CHECK(std::find(starts.begin(), starts.end(), 5) == starts.end());  // 0.1 km from a station
  CHECK(std::find(starts.begin(), starts.end(), 4) == starts.end());  // beyond t4 of all
  CHECK(std::find(starts.begin(), starts.end(), 3) != starts.end());
  for (int v : starts) {
    double nearest = 1e9;
    for (int st : s.stations()) nearest = std::min(nearest, c.distance(v, st));
    CHECK(nearest >= cfg.t3);
    CHECK(nearest <= cfg.t4);
  }
  s.new_lines_remaining = 0;
  CHECK(feasible_new_starts(s, c, cfg).empty());

  cfg.new_line_proximity = false;
  s.new_lines_remaining = 1;
  const auto loose = feasible_new_starts(s, c, cfg);
  CHECK(std::find(loose.begin(), loose.end(), 4) != loose.end());
}

TEST_CASE("new-start proximity agrees with a distance scan on a generated city") {
  const City c = generate_city(40, 5);
  const EnvConfig cfg = reference_env();
  const MetroState s = initial_state(c, cfg, 0);
  const auto starts = feasible_new_starts(s, c, cfg);
  for (int v = 0; v < 40; ++v) {
    double nearest = 1e9;
    for (int st : s.stations()) nearest = std::min(nearest, c.distance(v, st));
    const bool expect = nearest >= cfg.t3 && nearest <= cfg.t4;
    CHECK(expect == std::binary_search(starts.begin(), starts.end(), v));
  }
}

TEST_CASE("a node feasible both ways resolves as an extension") {
  const City c = bend_city();
  const EnvConfig cfg = small_config(5000, 1);
  const MetroState s = initial_state(c, cfg, 0);
  const auto starts = feasible_new_starts(s, c, cfg);
  REQUIRE(std::find(starts.begin(), starts.end(), 2) != starts.end());
  const ActionMask mask = action_mask(s, c, cfg);
  CHECK(mask.resolution[2].mode == ActionMode::Extend);
  CHECK(mask.resolution[3].mode == ActionMode::NewLine);
  CHECK(mask.allowed[4] == 0);
}

TEST_CASE("cheapest extension wins, ties go to the lower line") {
  // Two lines can reach node 4: line 0 from 1.0 km, line 1 from about 2.1 km.
  const City c = city_from_points({{0, 0}, {1, 0}, {3, 3}, {3.5, 1.5}, {2, 0}, {5, 5}}, {}, {{0, 1}, {2, 3}});
  EnvConfig cfg = small_config(5000, 0);
  cfg.initial_lines = 2;
  const MetroState s = initial_state(c, cfg, 0);
  const ActionMask mask = action_mask(s, c, cfg);
  REQUIRE(mask.allowed[4] == 1);
  CHECK(mask.resolution[4].line_id == 0);
  double cheapest = 1e18;
  for (const auto& e : feasible_extensions(s, c, cfg))
    if (e.node == 4) cheapest = std::min(cheapest, e.cost);
  CHECK(mask.resolution[4].cost == cheapest);

  const City sym = city_from_points({{0, 0}, {1, 0}, {3, 0}, {4, 0}, {2, 0}}, {}, {{0, 1}, {3, 2}});
  const MetroState t = initial_state(sym, cfg, 0);
  const ActionMask m2 = action_mask(t, sym, cfg);
  REQUIRE(m2.allowed[4] == 1);
  CHECK(m2.resolution[4].line_id == 0);
}

TEST_CASE("masked-out nodes raise invalid action") {
  const City c = bend_city();
  const HeteroGraph g = build_graph(c);
  Environment env(c, g, small_config(5000, 0));
  env.reset();
  CHECK_THROWS_AS(env.step(3), InvalidAction);
  CHECK_THROWS_AS(env.step(0), InvalidAction);
  CHECK_THROWS_AS(env.step(-1), InvalidAction);
  CHECK_THROWS_AS(env.step(99), InvalidAction);
  CHECK_NOTHROW(env.step(2));
}

TEST_CASE("spending the last of the budget ends the episode") {
  const City c = bend_city();
  const HeteroGraph g = build_graph(c);
  Environment env(c, g, small_config(800, 0));
  env.reset();
  const StepOutcome out = env.step(2);
  CHECK(out.next_state.budget_remaining == 0.0);
  CHECK(out.done);
  CHECK(env.done());
  CHECK(env.spend() == 800.0);
}

TEST_CASE("strict mode never selects an existing station") {
  const City c = generate_city(30, 4);
  const HeteroGraph g = build_graph(c);
  EnvConfig cfg = reference_env();
  cfg.initial_lines = 2;
  cfg.strict_appendix = true;
  std::mt19937_64 rng(5);
  for (int ep = 0; ep < 20; ++ep) {
    Environment env(c, g, cfg);
    env.reset(static_cast<std::uint64_t>(ep));
    while (!env.done()) {
      const auto nodes = env.mask().nodes();
      for (int v : nodes) CHECK_FALSE(env.state().is_station(v));
      env.step(nodes[rng() % nodes.size()]);
    }
  }
}

TEST_CASE("rewards telescope exactly and are nonnegative under alpha = 1") {
  const City c = generate_city(20, 0);
  const HeteroGraph g = build_graph(c);
  const EnvConfig cfg = reference_env();
  std::mt19937_64 rng(11);
  for (int ep = 0; ep < 25; ++ep) {
    Environment env(c, g, cfg);
    env.reset();
    double total = 0.0;
    while (!env.done()) {
      const auto nodes = env.mask().nodes();
      const MetroState before = env.state();
      const StepOutcome out = env.step(nodes[rng() % nodes.size()]);
      CHECK(out.reward >= 0.0);
      CHECK(out.info.delta_cod >= 0.0);
      CHECK(testing::transition_violation(before, out.next_state, c, cfg) == "");
      total += out.reward;
    }
    CHECK(total * env.reward_scale() == env.cod() - env.initial_cod());
  }
}

TEST_CASE("reward scale is the power of two at or above total flow") {
  const City c = generate_city(20, 0);
  const double s = reward_scale_for(c);
  CHECK(s >= c.total_flow());
  CHECK(s / 2 < c.total_flow());
  CHECK(std::log2(s) == std::floor(std::log2(s)));
}

TEST_CASE("equity reward term") {
  const City c = generate_city(20, 0);
  const HeteroGraph g = build_graph(c);
  EnvConfig cfg = reference_env();
  cfg.alpha = 0.0;
  cfg.beta = 1.0;
  Environment env(c, g, cfg);
  env.reset();
  const double ie0 = env.initial_ie();
  double prev = ie0;
  double total = 0.0;
  std::mt19937_64 rng(2);
  while (!env.done()) {
    const auto nodes = env.mask().nodes();
    const StepOutcome out = env.step(nodes[rng() % nodes.size()]);
    CHECK(out.reward == doctest::Approx((prev - env.ie()) / ie0).epsilon(1e-12));
    CHECK(env.ie() == doctest::Approx(testing::brute_force_inequity(env.state().stations(), c)).epsilon(1e-12));
    prev = env.ie();
    total += out.reward;
  }
  CHECK(total == doctest::Approx((ie0 - env.ie()) / ie0).epsilon(1e-12));
}

TEST_CASE("config validation") {
  EnvConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.t3 = 3.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EnvConfig{};
  cfg.budget = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EnvConfig{};
  cfg.alpha = 0.7;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EnvConfig{};
  cfg.initial_lines = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("oracle: no affordable action keeps the initial network") {
  const City c = bend_city();
  const OracleResult r = enumerate_episodes(c, small_config(100, 1), 10);
  CHECK(r.actions.empty());
  CHECK(r.leaves == 1);
  CHECK(r.final_state == initial_state(c, small_config(100, 1), 0));
  CHECK(r.value == satisfied_od(r.final_state, c));
}

TEST_CASE("oracle dominates greedy and equals the best recomputed leaf") {
  const City c = generate_city(12, 1);
  const HeteroGraph g = build_graph(c);
  EnvConfig cfg = reference_env();
  cfg.budget = 1700;
  cfg.max_new_lines = 1;
  double best = -1.0;
  std::size_t leaves = 0;
  const OracleResult r = enumerate_episodes(c, cfg, 10, 1e6, [&](const std::vector<int>& actions, double value) {
    const Solution s = replay(c, g, cfg, actions);
    std::vector<std::vector<int>> lines;
    Environment env(c, g, cfg);
    env.reset();
    for (int a : actions) env.step(a);
    for (const auto& l : env.state().lines) lines.push_back(l.stations);
    const double recomputed = testing::brute_force_cod(lines, c);
    CHECK(std::abs(recomputed - value) <= 1e-9 * recomputed);
    CHECK(s.cod == value);
    best = std::max(best, recomputed);
    ++leaves;
  });
  CHECK(r.leaves == leaves);
  CHECK(leaves > 1);
  CHECK(r.value == doctest::Approx(best).epsilon(1e-12));
  CHECK(r.value >= greedy(c, g, cfg).cod);
}

TEST_CASE("oracle refuses oversized instances") {
  const City c = generate_city(20, 0);
  CHECK_THROWS_AS(enumerate_episodes(c, reference_env(), 100), GuardRefusal);
  CHECK(oracle_size_estimate(c, reference_env(), 100) > 1e6);
}
