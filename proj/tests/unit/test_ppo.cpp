#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "metroplan/error.hpp"
#include "metroplan/ppo.hpp"

using namespace metroplan;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  City city = generate_city(20, 0);
  HeteroGraph graph = build_graph(city);
  EnvConfig env;
  AgentConfig agent;
  PpoConfig ppo;

  Fixture() {
    env.budget = 12000;
    env.initial_lines = 1;
    env.initial_line_length = 3;
    env.t4 = 4.0;
    env.max_new_lines = 3;
    agent.feature_dim = feature_dim(city.poi_categories());
    agent.hidden_dim = 16;
    agent.policy_hidden = 16;
    agent.value_hidden = 16;
    ppo.episodes_per_iteration = 4;
    ppo.iterations = 3;
  }
};

Trajectory hand_trajectory(std::vector<double> rewards, std::vector<double> values) {
  Trajectory t;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    TrajectoryStep s;
    s.reward = rewards[i];
    s.value = values[i];
    s.done = i + 1 == rewards.size();
    t.steps.push_back(s);
  }
  return t;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("metroplan_ppo_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("one-step advantages and terminal bootstrap") {
  const Trajectory t = hand_trajectory({1.0, 2.0, 3.0}, {0.5, 1.0, 1.5});
  const Advantages a = compute_advantages(t, 0.9, 0.0);
  CHECK(a.advantages[0] == doctest::Approx(1.0 + 0.9 * 1.0 - 0.5));
  CHECK(a.advantages[1] == doctest::Approx(2.0 + 0.9 * 1.5 - 1.0));
  CHECK(a.advantages[2] == doctest::Approx(3.0 - 1.5));
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.returns[i] == doctest::Approx(a.advantages[i] + t.steps[i].value));
}

TEST_CASE("lambda = 1 gives Monte-Carlo returns minus values") {
  const Trajectory t = hand_trajectory({1.0, 2.0, 3.0}, {0.5, 1.0, 1.5});
  const Advantages a = compute_advantages(t, 0.9, 1.0);
  // G2 = 3, G1 = 2 + 0.9 * 3 = 4.7, G0 = 1 + 0.9 * 4.7 = 5.23
  CHECK(a.returns[0] == doctest::Approx(5.23));
  CHECK(a.returns[1] == doctest::Approx(4.7));
  CHECK(a.returns[2] == doctest::Approx(3.0));
  CHECK(a.advantages[0] == doctest::Approx(4.73));
  CHECK(a.advantages[1] == doctest::Approx(3.7));
  CHECK(a.advantages[2] == doctest::Approx(1.5));
}

TEST_CASE("a perfect critic leaves no advantage") {
  const double g = 0.99;
  const std::vector<double> r{0.3, 0.1, 0.7, 0.2};
  std::vector<double> v(4);
  v[3] = r[3];
  for (int i = 2; i >= 0; --i) v[static_cast<std::size_t>(i)] = r[static_cast<std::size_t>(i)] + g * v[static_cast<std::size_t>(i) + 1];
  const Advantages a = compute_advantages(hand_trajectory(r, v), g, 0.0);
  for (double x : a.advantages) CHECK(std::abs(x) < 1e-15);
}

TEST_CASE("advantage normalization") {
  std::vector<double> a{1.0, -3.0, 2.5, 7.0, 0.0};
  normalize_advantages(a);
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / 5;
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  CHECK(std::abs(mean) < 1e-12);
  CHECK(std::abs(var / 5 - 1.0) < 1e-6);
  std::vector<double> single{4.0};
  normalize_advantages(single);
  CHECK(single[0] == 0.0);
}

TEST_CASE("rollouts are deterministic, feasible and telescoping") {
  Fixture f;
  const nn::ParameterSet p = init_agent_params(f.agent, 1);
  const Batch a = collect_rollouts(f.city, f.graph, f.env, p, f.agent, f.ppo, 0);
  const Batch b = collect_rollouts(f.city, f.graph, f.env, p, f.agent, f.ppo, 0);
  PpoConfig threaded = f.ppo;
  threaded.workers = 3;
  const Batch c = collect_rollouts(f.city, f.graph, f.env, p, f.agent, threaded, 0);
  REQUIRE(a.episodes.size() == 4);
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(a.episodes[e].actions() == b.episodes[e].actions());
    CHECK(a.episodes[e].actions() == c.episodes[e].actions());
    CHECK(a.episodes[e].total_reward() == c.episodes[e].total_reward());
    const Trajectory& t = a.episodes[e];
    CHECK(t.total_reward() * t.reward_scale == t.final_cod - t.initial_cod);
    int done = 0;
    for (const auto& s : t.steps) {
      CHECK(s.obs.mask[static_cast<std::size_t>(s.action)] == 1);
      CHECK(std::isfinite(s.reward));
      done += s.done ? 1 : 0;
    }
    CHECK(done == 1);
    CHECK(t.steps.back().done);
  }
}

TEST_CASE("budget below one station gives empty episodes") {
  Fixture f;
  f.env.budget = 100;
  const nn::ParameterSet p = init_agent_params(f.agent, 1);
  const Batch b = collect_rollouts(f.city, f.graph, f.env, p, f.agent, f.ppo, 0);
  CHECK(b.episodes.size() == 4);
  CHECK(b.step_count() == 0);
  nn::ParameterSet q = p;
  nn::AdamState adam;
  CHECK(ppo_update(b, q, adam, f.agent, GraphIndex::from(f.graph), f.ppo).empty());
  CHECK(q == p);
}

TEST_CASE("first epoch: identity ratio and additive loss terms") {
  Fixture f;
  const nn::ParameterSet p = init_agent_params(f.agent, 2);
  const Batch b = collect_rollouts(f.city, f.graph, f.env, p, f.agent, f.ppo, 0);
  nn::ParameterSet q = p;
  nn::AdamState adam;
  const auto epochs = ppo_update(b, q, adam, f.agent, GraphIndex::from(f.graph), f.ppo);
  REQUIRE(epochs.size() == 4);
  CHECK(std::abs(epochs[0].policy_loss) < 1e-12);
  CHECK(std::abs(epochs[0].approx_kl) < 1e-12);
  CHECK(epochs[0].clip_fraction == 0.0);
  CHECK(epochs[0].total_loss ==
        doctest::Approx(epochs[0].policy_loss + 0.5 * epochs[0].value_loss - 0.01 * epochs[0].entropy));
  CHECK_FALSE(q == p);
  CHECK(adam.step == 4);

  PpoConfig bare = f.ppo;
  bare.entropy_coef = 0.0;
  bare.value_coef = 0.0;
  std::vector<double> adv, ret;
  for (const auto& e : b.episodes) {
    const Advantages a = compute_advantages(e, bare.gamma, bare.gae_lambda);
    adv.insert(adv.end(), a.advantages.begin(), a.advantages.end());
    ret.insert(ret.end(), a.returns.begin(), a.returns.end());
  }
  normalize_advantages(adv);
  const LossEvaluation ev = evaluate_loss(b, adv, ret, p, f.agent, GraphIndex::from(f.graph), bare);
  CHECK(ev.metrics.total_loss == ev.metrics.policy_loss);
}

TEST_CASE("unclipped single epoch equals the vanilla policy gradient") {
  Fixture f;
  const nn::ParameterSet p = init_agent_params(f.agent, 3);
  const GraphIndex gi = GraphIndex::from(f.graph);
  const Batch b = collect_rollouts(f.city, f.graph, f.env, p, f.agent, f.ppo, 0);
  PpoConfig cfg = f.ppo;
  cfg.clip_epsilon = 1e9;
  cfg.entropy_coef = 0.0;
  cfg.value_coef = 0.0;
  std::vector<double> adv, ret;
  for (const auto& e : b.episodes) {
    const Advantages a = compute_advantages(e, cfg.gamma, cfg.gae_lambda);
    adv.insert(adv.end(), a.advantages.begin(), a.advantages.end());
    ret.insert(ret.end(), a.returns.begin(), a.returns.end());
  }
  normalize_advantages(adv);
  const LossEvaluation ev = evaluate_loss(b, adv, ret, p, f.agent, gi, cfg);

  // -mean(A * log pi(a|s)), differentiated on a separate tape.
  nn::Tape t;
  const auto vars = t.parameters(p);
  std::vector<nn::Var> terms;
  std::size_t i = 0;
  for (const auto& e : b.episodes)
    for (const auto& s : e.steps) {
      const nn::Var h = encode(t, vars, f.agent, gi, s.obs.features);
      const nn::Var lp = score_actions(t, vars, f.agent, gi, h, s.obs);
      terms.push_back(nn::scale(nn::pick(lp, 0, static_cast<std::size_t>(s.action)), -adv[i++]));
    }
  t.backward(nn::mean(nn::concat_cols(terms)));
  const auto pg = t.parameter_gradients(p);
  for (std::size_t k = 0; k < pg.size(); ++k)
    for (std::size_t j = 0; j < pg[k].size(); ++j)
      CHECK(ev.gradients[k][j] == doctest::Approx(pg[k][j]).epsilon(1e-9).scale(1e-12));
}

TEST_CASE("non-finite losses abort the update and keep the parameters") {
  Fixture f;
  const nn::ParameterSet p = init_agent_params(f.agent, 4);
  Batch b = collect_rollouts(f.city, f.graph, f.env, p, f.agent, f.ppo, 0);
  b.episodes[0].steps[0].reward = 1e300;
  nn::ParameterSet q = p;
  nn::AdamState adam;
  CHECK_THROWS_AS(ppo_update(b, q, adam, f.agent, GraphIndex::from(f.graph), f.ppo), NumericError);
  CHECK(q == p);
  CHECK(adam.step == 0);
}

TEST_CASE("config validation") {
  PpoConfig c;
  CHECK_NOTHROW(c.validate());
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PpoConfig{};
  c.clip_epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PpoConfig{};
  c.entropy_coef = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("metrics lines carry the documented fields") {
  IterationMetrics m;
  m.iteration = 2;
  m.mean_cod = 10.5;
  const auto j = nlohmann::json::parse(metrics_to_json_line(m));
  for (const char* key : {"iteration", "episodes", "steps", "mean_return", "mean_cod", "mean_cod_gain", "mean_ie",
                          "mean_spend", "policy_loss", "value_loss", "entropy", "total_loss", "approx_kl",
                          "clip_fraction", "final_total_loss"})
    CHECK_MESSAGE(j.contains(key), key);
  CHECK(j["iteration"] == 2);
}

TEST_CASE("train writes metrics and checkpoints, and resumes bit-exactly") {
  Fixture f;
  const fs::path full = scratch("full"), part = scratch("part");
  TrainOptions o;
  o.out_dir = full;
  o.checkpoint_every = 1;
  o.config_echo = "{}";
  const TrainResult r = train(f.city, f.graph, f.env, f.agent, f.ppo, o);
  CHECK(r.metrics.size() == 3);
  std::ifstream lines(full / "metrics.jsonl");
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 3);
  CHECK(fs::exists(full / "checkpoint.json"));
  CHECK(fs::exists(full / "config.json"));
  CHECK(fs::exists(full / "checkpoints" / "iter_0001.json"));

  PpoConfig two = f.ppo;
  two.iterations = 2;
  TrainOptions first;
  first.out_dir = part;
  train(f.city, f.graph, f.env, f.agent, two, first);
  TrainOptions resume;
  resume.out_dir = part;
  resume.resume = part / "checkpoint.json";
  const TrainResult rest = train(f.city, f.graph, f.env, f.agent, f.ppo, resume);
  CHECK(rest.metrics.size() == 1);
  CHECK(slurp(part / "metrics.jsonl") == slurp(full / "metrics.jsonl"));
  CHECK(slurp(part / "checkpoint.json") == slurp(full / "checkpoint.json"));
  fs::remove_all(full);
  fs::remove_all(part);
}

TEST_CASE("restore rejects a checkpoint for another agent") {
  Fixture f;
  Trainer a(f.city, f.graph, f.env, f.agent, f.ppo);
  AgentConfig wider = f.agent;
  wider.hidden_dim = 32;
  Trainer b(f.city, f.graph, f.env, wider, f.ppo);
  CHECK_THROWS_AS(b.restore(a.checkpoint()), ValidationError);
  CHECK(agent_config_from_checkpoint(a.checkpoint()) == f.agent);
  Trainer c(f.city, f.graph, f.env, f.agent, f.ppo);
  c.step();
  a.restore(c.checkpoint());
  CHECK(a.iteration() == 1);
  CHECK(a.params() == c.params());
}
