#include "metroplan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "metroplan/ppo.hpp"

namespace metroplan {

double gradient_rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(const std::function<double(const nn::ParameterSet&)>& loss,
                                const nn::ParameterSet& params, const std::vector<nn::Matrix>& analytic, double h) {
  GradCheckReport report;
  nn::ParameterSet work = params;
  for (std::size_t p = 0; p < work.size(); ++p) {
    double worst = 0.0;
    auto data = work[p].value.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = loss(work);
      data[i] = saved - h;
      const double down = loss(work);
      data[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[p][i];
      const double err = gradient_rel_error(a, numeric);
      worst = std::max(worst, err);
      if (err > report.max_rel_error || report.checked == 0) {
        report.max_rel_error = err;
        report.worst_parameter = work[p].name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
      ++report.checked;
    }
    report.per_parameter.emplace_back(work[p].name, worst);
  }
  return report;
}

GradCheckReport agent_gradient_check(std::uint64_t seed, double h) {
  const City city = generate_city(10, seed);
  const HeteroGraph graph = build_graph(city);
  EnvConfig env;
  env.initial_lines = 1;
  env.initial_line_length = 3;
  env.budget = 2500.0;
  env.max_new_lines = 1;
  env.t4 = 4.0;

  AgentConfig agent;
  agent.feature_dim = feature_dim(city.poi_categories());
  const nn::ParameterSet params = init_agent_params(agent, mix_seed(seed, 0, 0));
  const GraphIndex index = GraphIndex::from(graph);

  Batch batch;
  batch.episodes.push_back(run_episode(city, graph, env, params, agent, episode_seed(seed, 0, 0), false));
  PpoConfig ppo;
  std::vector<double> advantages, returns;
  for (const auto& e : batch.episodes) {
    const Advantages a = compute_advantages(e, ppo.gamma, ppo.gae_lambda);
    advantages.insert(advantages.end(), a.advantages.begin(), a.advantages.end());
    returns.insert(returns.end(), a.returns.begin(), a.returns.end());
  }
  normalize_advantages(advantages);

  const LossEvaluation base = evaluate_loss(batch, advantages, returns, params, agent, index, ppo);
  auto loss = [&](const nn::ParameterSet& p) {
    return evaluate_loss(batch, advantages, returns, p, agent, index, ppo).metrics.total_loss;
  };
  return check_gradients(loss, params, base.gradients, h);
}

}  // namespace metroplan
