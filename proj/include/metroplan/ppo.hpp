#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metroplan/agent.hpp"
#include "metroplan/env.hpp"
#include "metroplan/nn/adam.hpp"
#include "metroplan/nn/checkpoint.hpp"

namespace metroplan {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.0;       // 0 = one-step TD advantages
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double clip_epsilon = 0.2;
  int epochs_per_batch = 4;
  int episodes_per_iteration = 8;
  int iterations = 50;
  std::uint64_t seed = 0;
  int workers = 1;               // rollout threads; results do not depend on it
  nn::AdamConfig adam;

  // Throws ConfigError on invalid values.
  void validate() const;
};

struct TrajectoryStep {
  Observation obs;     // state the action was taken in
  int action = -1;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
};

struct Trajectory {
  std::uint64_t seed = 0;
  std::vector<TrajectoryStep> steps;
  double initial_cod = 0.0, final_cod = 0.0;
  double initial_ie = 0.0, final_ie = 0.0;
  double spend = 0.0;
  double reward_scale = 1.0;

  std::vector<int> actions() const;
  double total_reward() const;
};

struct Batch {
  std::vector<Trajectory> episodes;
  std::size_t step_count() const;
};

// Plays one episode from the configured initial network. Sampling draws from
// an Rng seeded with `seed`; greedy mode takes the policy's argmax instead.
Trajectory run_episode(const City& city, const HeteroGraph& graph, const EnvConfig& env_config,
                       const nn::ParameterSet& params, const AgentConfig& agent, std::uint64_t seed, bool greedy);

// Per-episode seed: mix_seed(ppo.seed, iteration + 1, episode).
std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t iteration, std::uint64_t episode);

// episodes_per_iteration sampled episodes. Episodes are seeded independently,
// so the batch is the same for any worker count.
Batch collect_rollouts(const City& city, const HeteroGraph& graph, const EnvConfig& env_config,
                       const nn::ParameterSet& params, const AgentConfig& agent, const PpoConfig& ppo,
                       std::uint64_t iteration);

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// delta_t = r_t + gamma V(s_{t+1}) (1 - done_t) - V(s_t)
// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1};  R_t = A_t + V(s_t)
Advantages compute_advantages(const Trajectory& trajectory, double gamma, double lambda);

// In place: zero mean, unit variance (population, eps 1e-8). A single value
// becomes 0.
void normalize_advantages(std::vector<double>& advantages, double eps = 1e-8);

struct LossMetrics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total_loss = 0.0;
  double approx_kl = 0.0;       // mean(old_logp - new_logp)
  double clip_fraction = 0.0;   // share of steps with |ratio - 1| > eps
};

// Loss of the whole batch under the current parameters, with gradients.
// advantages/returns are flat over the batch in episode order.
struct LossEvaluation {
  LossMetrics metrics;
  std::vector<nn::Matrix> gradients;
};
LossEvaluation evaluate_loss(const Batch& batch, const std::vector<double>& advantages,
                             const std::vector<double>& returns, const nn::ParameterSet& params,
                             const AgentConfig& agent, const GraphIndex& graph, const PpoConfig& ppo);

// epochs_per_batch full-batch Adam steps. Returns the metrics of every epoch,
// each measured before that epoch's step. An empty batch returns no epochs
// and leaves the parameters alone. Non-finite losses or updates throw
// NumericError with the parameters untouched.
std::vector<LossMetrics> ppo_update(const Batch& batch, nn::ParameterSet& params, nn::AdamState& adam,
                                    const AgentConfig& agent, const GraphIndex& graph, const PpoConfig& ppo);

// One metrics record per iteration.
struct IterationMetrics {
  int iteration = 0;
  std::size_t episodes = 0;
  std::size_t steps = 0;
  double mean_return = 0.0;
  double mean_cod = 0.0;        // final C_od, averaged over episodes
  double mean_cod_gain = 0.0;   // final minus initial C_od
  double mean_ie = 0.0;
  double mean_spend = 0.0;
  LossMetrics loss;             // first epoch of the update
  LossMetrics final_loss;       // last epoch of the update
};

std::string metrics_to_json_line(const IterationMetrics& m);

// Collect / update loop state.
class Trainer {
 public:
  Trainer(const City& city, const HeteroGraph& graph, EnvConfig env, AgentConfig agent, PpoConfig ppo);

  IterationMetrics step();  // one iteration
  int iteration() const { return iteration_; }
  const nn::ParameterSet& params() const { return params_; }
  const nn::AdamState& adam() const { return adam_; }

  // Checkpoint with the iteration count and configs in its metadata.
  nn::Checkpoint checkpoint() const;
  // Throws ValidationError if the checkpoint does not fit this agent.
  void restore(const nn::Checkpoint& checkpoint);

 private:
  const City* city_;
  const HeteroGraph* graph_;
  EnvConfig env_;
  AgentConfig agent_;
  PpoConfig ppo_;
  GraphIndex index_;
  nn::ParameterSet params_;
  nn::AdamState adam_;
  int iteration_ = 0;
};

// Agent dimensions recorded by Trainer::checkpoint. Throws ParseError when
// the metadata lacks them.
AgentConfig agent_config_from_checkpoint(const nn::Checkpoint& checkpoint);

struct TrainOptions {
  std::filesystem::path out_dir;
  int checkpoint_every = 10;               // 0 = final checkpoint only
  std::optional<std::filesystem::path> resume;
  std::string config_echo;                  // written to out_dir/config.json when set
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  std::vector<IterationMetrics> metrics;    // iterations run by this call
};

// Runs until ppo.iterations iterations have been completed in total. Writes
//   out_dir/metrics.jsonl            one record per iteration
//   out_dir/checkpoint.json          final parameters and optimizer state
//   out_dir/checkpoints/iter_NNNN.json   every checkpoint_every iterations
// On resume the metrics file is truncated to the resumed iteration and
// extended from there.
TrainResult train(const City& city, const HeteroGraph& graph, const EnvConfig& env, const AgentConfig& agent,
                  const PpoConfig& ppo, const TrainOptions& options);

}  // namespace metroplan
