#include "metroplan/ppo.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "io_util.hpp"
#include "metroplan/error.hpp"

namespace metroplan {

using nn::Matrix;
using nn::Var;
using json = nlohmann::json;

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo.gamma must be in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("ppo.gae_lambda must be in [0, 1]");
  if (!(entropy_coef >= 0.0)) throw ConfigError("ppo.entropy_coef must be >= 0");
  if (!(value_coef >= 0.0)) throw ConfigError("ppo.value_coef must be >= 0");
  if (!(clip_epsilon > 0.0)) throw ConfigError("ppo.clip_epsilon must be > 0");
  if (epochs_per_batch < 1) throw ConfigError("ppo.epochs_per_batch must be >= 1");
  if (episodes_per_iteration < 1) throw ConfigError("ppo.episodes_per_iteration must be >= 1");
  if (iterations < 0) throw ConfigError("ppo.iterations must be >= 0");
  if (workers < 1) throw ConfigError("ppo.workers must be >= 1");
  if (!(adam.lr > 0.0)) throw ConfigError("ppo.lr must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("ppo.beta1 must be in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("ppo.beta2 must be in [0, 1)");
  if (!(adam.eps > 0.0)) throw ConfigError("ppo.adam_eps must be > 0");
  if (!(adam.weight_decay >= 0.0)) throw ConfigError("ppo.weight_decay must be >= 0");
}

std::vector<int> Trajectory::actions() const {
  std::vector<int> out;
  for (const auto& s : steps) out.push_back(s.action);
  return out;
}

double Trajectory::total_reward() const {
  double r = 0.0;
  for (const auto& s : steps) r += s.reward;
  return r;
}

std::size_t Batch::step_count() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.steps.size();
  return n;
}

Trajectory run_episode(const City& city, const HeteroGraph& graph, const EnvConfig& env_config,
                       const nn::ParameterSet& params, const AgentConfig& agent, std::uint64_t seed, bool greedy) {
  Environment env(city, graph, env_config);
  env.reset();
  const GraphIndex index = GraphIndex::from(graph);
  Rng rng(seed);
  Trajectory traj;
  traj.seed = seed;
  traj.initial_cod = env.cod();
  traj.initial_ie = env.ie();
  traj.reward_scale = env.reward_scale();
  while (!env.done()) {
    TrajectoryStep step;
    step.obs = observe(env);
    const PolicyOutput out = evaluate_policy(params, agent, index, step.obs);
    const ActionSample a = sample_action(out.log_probs, rng, greedy);
    const StepOutcome outcome = env.step(a.node);
    step.action = a.node;
    step.log_prob = a.log_prob;
    step.value = out.value;
    step.reward = outcome.reward;
    step.done = outcome.done;
    traj.steps.push_back(std::move(step));
  }
  traj.final_cod = env.cod();
  traj.final_ie = env.ie();
  traj.spend = env.spend();
  return traj;
}

std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t iteration, std::uint64_t episode) {
  return mix_seed(seed, iteration + 1, episode);
}

Batch collect_rollouts(const City& city, const HeteroGraph& graph, const EnvConfig& env_config,
                       const nn::ParameterSet& params, const AgentConfig& agent, const PpoConfig& ppo,
                       std::uint64_t iteration) {
  const auto n = static_cast<std::size_t>(ppo.episodes_per_iteration);
  Batch batch;
  batch.episodes.resize(n);
  auto play = [&](std::size_t e) {
    batch.episodes[e] = run_episode(city, graph, env_config, params, agent, episode_seed(ppo.seed, iteration, e), false);
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(ppo.workers), n);
  if (workers <= 1) {
    for (std::size_t e = 0; e < n; ++e) play(e);
    return batch;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t e = w; e < n; e += workers) play(e);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  return batch;
}

Advantages compute_advantages(const Trajectory& trajectory, double gamma, double lambda) {
  const auto& s = trajectory.steps;
  const std::size_t n = s.size();
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double live = s[i].done ? 0.0 : 1.0;
    const double next_value = i + 1 < n ? s[i + 1].value : 0.0;
    const double delta = s[i].reward + gamma * next_value * live - s[i].value;
    const double adv = delta + gamma * lambda * live * next_adv;
    out.advantages[i] = adv;
    out.returns[i] = adv + s[i].value;
    next_adv = adv;
  }
  return out;
}

void normalize_advantages(std::vector<double>& advantages, double eps) {
  if (advantages.empty()) return;
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(advantages.size());
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(advantages.size());
  const double sd = std::sqrt(var + eps);
  for (double& a : advantages) a = (a - mean) / sd;
}

LossEvaluation evaluate_loss(const Batch& batch, const std::vector<double>& advantages,
                             const std::vector<double>& returns, const nn::ParameterSet& params,
                             const AgentConfig& agent, const GraphIndex& graph, const PpoConfig& ppo) {
  const std::size_t n = batch.step_count();
  if (n == 0) throw InvalidArgument("evaluate_loss: empty batch");
  if (advantages.size() != n || returns.size() != n)
    throw InvalidArgument("evaluate_loss: advantages/returns do not match the batch");

  nn::Tape tape;
  const auto vars = tape.parameters(params);
  std::vector<Var> surrogate, value_err, entropy;
  LossMetrics m;
  std::size_t t = 0;
  for (const auto& episode : batch.episodes) {
    for (const auto& step : episode.steps) {
      Var h = encode(tape, vars, agent, graph, step.obs.features);
      Var lp = score_actions(tape, vars, agent, graph, h, step.obs);
      Var v = state_value(tape, vars, agent, h, step.obs);

      Var logp = nn::pick(lp, 0, static_cast<std::size_t>(step.action));
      Var ratio = nn::exp(nn::sub(logp, tape.constant(Matrix(1, 1, step.log_prob))));
      Var adv = tape.constant(Matrix(1, 1, advantages[t]));
      Var clipped = nn::clamp(ratio, 1.0 - ppo.clip_epsilon, 1.0 + ppo.clip_epsilon);
      surrogate.push_back(nn::minimum(nn::mul(ratio, adv), nn::mul(clipped, adv)));
      value_err.push_back(nn::square(nn::sub(v, tape.constant(Matrix(1, 1, returns[t])))));
      entropy.push_back(nn::scale(nn::sum(nn::mul(nn::exp(lp), lp)), -1.0));

      m.approx_kl += step.log_prob - logp.scalar();
      if (std::abs(ratio.scalar() - 1.0) > ppo.clip_epsilon) m.clip_fraction += 1.0;
      ++t;
    }
  }
  Var policy_loss = nn::scale(nn::mean(nn::concat_cols(surrogate)), -1.0);
  Var value_loss = nn::mean(nn::concat_cols(value_err));
  Var mean_entropy = nn::mean(nn::concat_cols(entropy));
  Var total = nn::sub(nn::add(policy_loss, nn::scale(value_loss, ppo.value_coef)),
                      nn::scale(mean_entropy, ppo.entropy_coef));
  tape.backward(total);

  m.policy_loss = policy_loss.scalar();
  m.value_loss = value_loss.scalar();
  m.entropy = mean_entropy.scalar();
  m.total_loss = total.scalar();
  m.approx_kl /= static_cast<double>(n);
  m.clip_fraction /= static_cast<double>(n);
  return {m, tape.parameter_gradients(params)};
}

std::vector<LossMetrics> ppo_update(const Batch& batch, nn::ParameterSet& params, nn::AdamState& adam,
                                    const AgentConfig& agent, const GraphIndex& graph, const PpoConfig& ppo) {
  std::vector<LossMetrics> epochs;
  if (batch.step_count() == 0) return epochs;
  std::vector<double> advantages, returns;
  for (const auto& episode : batch.episodes) {
    const Advantages a = compute_advantages(episode, ppo.gamma, ppo.gae_lambda);
    advantages.insert(advantages.end(), a.advantages.begin(), a.advantages.end());
    returns.insert(returns.end(), a.returns.begin(), a.returns.end());
  }
  normalize_advantages(advantages);

  nn::ParameterSet work = params;
  nn::AdamState work_adam = adam;
  for (int e = 0; e < ppo.epochs_per_batch; ++e) {
    LossEvaluation eval;
    try {
      eval = evaluate_loss(batch, advantages, returns, work, agent, graph, ppo);
    } catch (const NumericError& err) {
      throw NumericError("ppo_update: non-finite value in epoch " + std::to_string(e) + ": " + err.what());
    }
    if (!std::isfinite(eval.metrics.total_loss))
      throw NumericError("ppo_update: non-finite loss in epoch " + std::to_string(e));
    for (std::size_t i = 0; i < eval.gradients.size(); ++i)
      if (!eval.gradients[i].all_finite())
        throw NumericError("ppo_update: non-finite gradient for " + work[i].name + " in epoch " + std::to_string(e));
    nn::adam_step(work, eval.gradients, work_adam, ppo.adam);
    epochs.push_back(eval.metrics);
  }
  params = std::move(work);
  adam = std::move(work_adam);
  return epochs;
}

namespace {

json loss_json(const LossMetrics& l) {
  return {{"policy_loss", l.policy_loss}, {"value_loss", l.value_loss}, {"entropy", l.entropy},
          {"total_loss", l.total_loss},   {"approx_kl", l.approx_kl},   {"clip_fraction", l.clip_fraction}};
}

json agent_json(const AgentConfig& a) {
  return {{"feature_dim", a.feature_dim},     {"hidden_dim", a.hidden_dim},
          {"layers", a.layers},               {"heads", a.heads},
          {"policy_hidden", a.policy_hidden}, {"value_hidden", a.value_hidden},
          {"policy_mask", to_string(a.policy_mask)}};
}

}  // namespace

std::string metrics_to_json_line(const IterationMetrics& m) {
  json j = {{"iteration", m.iteration},
            {"episodes", m.episodes},
            {"steps", m.steps},
            {"mean_return", m.mean_return},
            {"mean_cod", m.mean_cod},
            {"mean_cod_gain", m.mean_cod_gain},
            {"mean_ie", m.mean_ie},
            {"mean_spend", m.mean_spend}};
  const json loss = loss_json(m.loss);
  for (const auto& [k, v] : loss.items()) j[k] = v;
  j["final_total_loss"] = m.final_loss.total_loss;
  return j.dump();
}

Trainer::Trainer(const City& city, const HeteroGraph& graph, EnvConfig env, AgentConfig agent, PpoConfig ppo)
    : city_(&city), graph_(&graph), env_(std::move(env)), agent_(agent), ppo_(std::move(ppo)),
      index_(GraphIndex::from(graph)) {
  if (agent_.feature_dim == 0) agent_.feature_dim = feature_dim(city.poi_categories());
  if (agent_.feature_dim != feature_dim(city.poi_categories()))
    throw ConfigError("agent.feature_dim " + std::to_string(agent_.feature_dim) + " does not match the city's " +
                      std::to_string(feature_dim(city.poi_categories())));
  env_.validate();
  agent_.validate();
  ppo_.validate();
  params_ = init_agent_params(agent_, mix_seed(ppo_.seed, 0, 0));
  adam_ = nn::AdamState::zeros_like(params_);
}

IterationMetrics Trainer::step() {
  const Batch batch = collect_rollouts(*city_, *graph_, env_, params_, agent_, ppo_,
                                       static_cast<std::uint64_t>(iteration_));
  IterationMetrics m;
  m.iteration = iteration_;
  m.episodes = batch.episodes.size();
  m.steps = batch.step_count();
  for (const auto& e : batch.episodes) {
    m.mean_return += e.total_reward();
    m.mean_cod += e.final_cod;
    m.mean_cod_gain += e.final_cod - e.initial_cod;
    m.mean_ie += e.final_ie;
    m.mean_spend += e.spend;
  }
  const double inv = 1.0 / static_cast<double>(m.episodes);
  m.mean_return *= inv;
  m.mean_cod *= inv;
  m.mean_cod_gain *= inv;
  m.mean_ie *= inv;
  m.mean_spend *= inv;
  const auto epochs = ppo_update(batch, params_, adam_, agent_, index_, ppo_);
  if (!epochs.empty()) {
    m.loss = epochs.front();
    m.final_loss = epochs.back();
  }
  ++iteration_;
  return m;
}

nn::Checkpoint Trainer::checkpoint() const {
  json meta = {{"iteration", iteration_}, {"seed", ppo_.seed}, {"agent", agent_json(agent_)}};
  return {params_, adam_, meta.dump()};
}

void Trainer::restore(const nn::Checkpoint& checkpoint) {
  const auto names = parameter_manifest(agent_);
  if (checkpoint.parameters.size() != names.size())
    throw ValidationError("checkpoint has " + std::to_string(checkpoint.parameters.size()) +
                          " parameters, the agent needs " + std::to_string(names.size()));
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (checkpoint.parameters[i].name != names[i])
      throw ValidationError("checkpoint parameter " + std::to_string(i) + " is '" + checkpoint.parameters[i].name +
                            "', expected '" + names[i] + "'");
    if (!checkpoint.parameters[i].value.same_shape(params_[i].value))
      throw ValidationError("checkpoint parameter '" + names[i] + "' has shape " +
                            checkpoint.parameters[i].value.shape() + ", expected " + params_[i].value.shape());
  }
  int iteration = 0;
  try {
    const json meta = json::parse(checkpoint.metadata);
    iteration = meta.value("iteration", 0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint metadata: ") + e.what());
  }
  params_ = checkpoint.parameters;
  adam_ = checkpoint.adam.m.empty() ? nn::AdamState::zeros_like(params_) : checkpoint.adam;
  iteration_ = iteration;
}

AgentConfig agent_config_from_checkpoint(const nn::Checkpoint& checkpoint) {
  try {
    const json meta = json::parse(checkpoint.metadata);
    if (!meta.contains("agent")) throw ParseError("checkpoint metadata: missing 'agent'");
    const json& a = meta.at("agent");
    AgentConfig c;
    c.feature_dim = a.at("feature_dim").get<std::size_t>();
    c.hidden_dim = a.at("hidden_dim").get<int>();
    c.layers = a.at("layers").get<int>();
    c.heads = a.at("heads").get<int>();
    c.policy_hidden = a.at("policy_hidden").get<int>();
    c.value_hidden = a.at("value_hidden").get<int>();
    c.policy_mask = policy_mask_from_string(a.at("policy_mask").get<std::string>());
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint metadata.agent: ") + e.what());
  }
}

TrainResult train(const City& city, const HeteroGraph& graph, const EnvConfig& env, const AgentConfig& agent,
                  const PpoConfig& ppo, const TrainOptions& options) {
  Trainer trainer(city, graph, env, agent, ppo);
  const auto metrics_path = options.out_dir / "metrics.jsonl";
  std::vector<std::string> previous;
  if (options.resume) {
    trainer.restore(nn::load_checkpoint(*options.resume));
    if (std::filesystem::exists(metrics_path)) {
      std::istringstream in(detail::read_text_file(metrics_path));
      std::string line;
      while (static_cast<int>(previous.size()) < trainer.iteration() && std::getline(in, line))
        if (!line.empty()) previous.push_back(line);
    }
  }
  std::filesystem::create_directories(options.out_dir);
  if (!options.config_echo.empty()) detail::write_text_file(options.out_dir / "config.json", options.config_echo);

  std::ofstream metrics_out(metrics_path, std::ios::trunc);
  if (!metrics_out) throw IoError("cannot write " + metrics_path.string());
  for (const auto& line : previous) metrics_out << line << '\n';

  TrainResult result;
  while (trainer.iteration() < ppo.iterations) {
    result.metrics.push_back(trainer.step());
    metrics_out << metrics_to_json_line(result.metrics.back()) << '\n';
    metrics_out.flush();
    if (options.checkpoint_every > 0 && trainer.iteration() % options.checkpoint_every == 0) {
      std::ostringstream name;
      name << "iter_" << std::setw(4) << std::setfill('0') << trainer.iteration() << ".json";
      nn::save_checkpoint(trainer.checkpoint(), options.out_dir / "checkpoints" / name.str());
    }
  }
  if (!metrics_out) throw IoError("failed writing " + metrics_path.string());
  result.checkpoint = trainer.checkpoint();
  nn::save_checkpoint(result.checkpoint, options.out_dir / "checkpoint.json");
  return result;
}

}  // namespace metroplan
