#include "metroplan/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "metroplan/error.hpp"
#include "metroplan/random.hpp"

namespace metroplan {

namespace {

double fd3(const Environment& env, int node) {
  double f = 0.0;
  for (int s : env.state().stations()) f += env.city().symmetric_flow(node, s);
  return f;
}

Solution summarize(const Environment& env, std::vector<int> actions, std::string method, std::uint64_t seed) {
  Solution s;
  s.method = std::move(method);
  s.seed = seed;
  s.actions = std::move(actions);
  s.cod = env.cod();
  s.ie = env.ie();
  s.spend = env.spend();
  s.objective = episode_objective(env);
  return s;
}

// Shared machinery: a reset environment to copy from and sequence surgery
// that only ever takes masked-in actions.
class Episodes {
 public:
  Episodes(const City& city, const HeteroGraph& graph, const EnvConfig& config) : base_(city, graph, config) {
    base_.reset();
  }

  const Environment& base() const { return base_; }

  // Magnitude the SA acceptance percentages refer to.
  double reference() const {
    const auto& c = base_.config();
    const double ref = c.alpha * base_.initial_cod() / base_.reward_scale() + c.beta;
    return ref > 0.0 ? ref : 1.0;
  }

  // Steps through `actions` until one is masked out or the episode ends;
  // returns how many were taken.
  std::size_t follow(Environment& env, std::span<const int> actions) const {
    std::size_t n = 0;
    for (int a : actions) {
      if (env.done() || a < 0 || static_cast<std::size_t>(a) >= env.mask().allowed.size() ||
          !env.mask().allowed[static_cast<std::size_t>(a)])
        break;
      env.step(a);
      ++n;
    }
    return n;
  }

  void roll_out(Environment& env, std::vector<int>& actions, Rng& rng) const {
    while (!env.done()) {
      const auto nodes = env.mask().nodes();
      const int a = nodes[rng.index(nodes.size())];
      env.step(a);
      actions.push_back(a);
    }
  }

  // Keeps actions[0, cut) and re-rolls the rest.
  Solution reroll(const std::vector<int>& actions, std::size_t cut, Rng& rng) {
    Environment env = base_;
    std::vector<int> seq(actions.begin(), actions.begin() + static_cast<std::ptrdiff_t>(cut));
    follow(env, seq);
    roll_out(env, seq, rng);
    ++evaluations;
    return summarize(env, std::move(seq), "", 0);
  }

  Solution random(Rng& rng) { return reroll({}, 0, rng); }

  std::size_t evaluations = 0;

 private:
  Environment base_;
};

bool better(const Solution& a, const Solution& b) { return a.objective > b.objective; }

}  // namespace

double episode_objective(const Environment& env) {
  const auto& c = env.config();
  const double ie_scale = env.initial_ie() > 0.0 ? env.initial_ie() : 1.0;
  return c.alpha * (env.cod() - env.initial_cod()) / env.reward_scale() +
         c.beta * (env.initial_ie() - env.ie()) / ie_scale;
}

Solution replay(const City& city, const HeteroGraph& graph, const EnvConfig& config, std::span<const int> actions) {
  Environment env(city, graph, config);
  env.reset();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    try {
      env.step(actions[i]);
    } catch (const InvalidAction& e) {
      throw InvalidAction("replay step " + std::to_string(i) + ": " + e.what());
    }
  }
  return summarize(env, {actions.begin(), actions.end()}, "", 0);
}

int greedy_pick(const Environment& env) {
  int best = -1;
  double best_flow = -1.0;
  for (int node : env.mask().nodes()) {
    const double f = fd3(env, node);
    if (f > best_flow) {
      best = node;
      best_flow = f;
    }
  }
  if (best < 0) throw InvalidState("greedy_pick: no feasible action");
  return best;
}

Solution greedy(const City& city, const HeteroGraph& graph, const EnvConfig& config) {
  Environment env(city, graph, config);
  env.reset();
  std::vector<int> actions;
  while (!env.done()) {
    const int a = greedy_pick(env);
    env.step(a);
    actions.push_back(a);
  }
  Solution s = summarize(env, std::move(actions), "gs", 0);
  s.evaluations = 1;
  s.best_trace = {s.objective};
  return s;
}

Solution random_episode(const City& city, const HeteroGraph& graph, const EnvConfig& config, std::uint64_t seed) {
  Episodes episodes(city, graph, config);
  Rng rng(seed);
  Solution s = episodes.random(rng);
  s.method = "random";
  s.seed = seed;
  s.evaluations = 1;
  return s;
}

void SaConfig::validate() const {
  if (!(t0 > 0.0)) throw ConfigError("baseline.sa_t0 must be > 0");
  if (!(cooling > 0.0 && cooling < 1.0)) throw ConfigError("baseline.sa_cooling must be in (0, 1)");
  if (!(t_min > 0.0)) throw ConfigError("baseline.sa_t_min must be > 0");
  if (iters_per_temp < 1) throw ConfigError("baseline.sa_iters_per_temp must be >= 1");
  if (!(min_reroll_fraction >= 0.0 && min_reroll_fraction <= 1.0))
    throw ConfigError("baseline.sa_min_reroll_fraction must be in [0, 1]");
}

Solution simulated_annealing(const City& city, const HeteroGraph& graph, const EnvConfig& config,
                             const SaConfig& sa, std::uint64_t seed) {
  sa.validate();
  Episodes episodes(city, graph, config);
  Rng rng(seed);
  Solution current = greedy(city, graph, config);
  episodes.evaluations = 1;
  Solution best = current;
  const double ref = episodes.reference();
  std::vector<double> trace;
  for (double t = sa.t0; t > sa.t_min; t *= sa.cooling) {
    for (int it = 0; it < sa.iters_per_temp; ++it) {
      const std::size_t len = current.actions.size();
      const std::size_t cut = rng.index(len + 1);
      // The acceptance draw is taken every iteration to keep the stream
      // independent of which branch runs.
      const double u = rng.uniform();
      if (len > 0 && static_cast<double>(len - cut) < sa.min_reroll_fraction * static_cast<double>(len)) {
        trace.push_back(best.objective);
        continue;
      }
      Solution cand = episodes.reroll(current.actions, cut, rng);
      const double delta = 100.0 * (cand.objective - current.objective) / ref;
      if (delta > 0.0 || u < std::exp(delta / t)) current = std::move(cand);
      if (better(current, best)) best = current;
      trace.push_back(best.objective);
    }
  }
  best.method = "sa";
  best.seed = seed;
  best.evaluations = episodes.evaluations;
  best.best_trace = std::move(trace);
  return best;
}

void GaConfig::validate() const {
  if (population < 2) throw ConfigError("baseline.ga_population must be >= 2");
  if (max_evaluations < population) throw ConfigError("baseline.ga_max_evaluations must be >= ga_population");
  if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0)) throw ConfigError("baseline.ga_crossover_prob must be in [0, 1]");
  if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) throw ConfigError("baseline.ga_mutation_prob must be in [0, 1]");
  if (tournament < 1) throw ConfigError("baseline.ga_tournament must be >= 1");
  if (elitism < 0 || elitism >= population) throw ConfigError("baseline.ga_elitism must be in [0, ga_population)");
}

Solution genetic(const City& city, const HeteroGraph& graph, const EnvConfig& config, const GaConfig& ga,
                 std::uint64_t seed) {
  ga.validate();
  Episodes episodes(city, graph, config);
  Rng rng(seed);
  const auto pop_size = static_cast<std::size_t>(ga.population);

  std::vector<Solution> pop;
  pop.push_back(greedy(city, graph, config));
  episodes.evaluations = 1;
  while (pop.size() < pop_size) pop.push_back(episodes.random(rng));

  auto best_of = [](const std::vector<Solution>& p) {
    return *std::max_element(p.begin(), p.end(), [](const Solution& a, const Solution& b) { return better(b, a); });
  };
  Solution best = best_of(pop);
  std::vector<double> trace{best.objective};

  auto tournament = [&]() -> const Solution& {
    std::size_t pick = rng.index(pop.size());
    for (int i = 1; i < ga.tournament; ++i) {
      const std::size_t other = rng.index(pop.size());
      if (better(pop[other], pop[pick]) || (pop[other].objective == pop[pick].objective && other < pick))
        pick = other;
    }
    return pop[pick];
  };

  const auto elites = static_cast<std::size_t>(ga.elitism);
  std::size_t spent = pop_size;
  while (spent + (pop_size - elites) <= static_cast<std::size_t>(ga.max_evaluations)) {
    std::vector<std::size_t> order(pop.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return better(pop[a], pop[b]); });
    std::vector<Solution> next;
    for (std::size_t i = 0; i < elites; ++i) next.push_back(pop[order[i]]);
    while (next.size() < pop_size) {
      const Solution& p1 = tournament();
      const Solution& p2 = tournament();
      const double u_cross = rng.uniform();
      const double u_mut = rng.uniform();
      Solution child = p1;
      if (u_cross < ga.crossover_prob) {
        const std::size_t shorter = std::min(p1.actions.size(), p2.actions.size());
        const std::size_t cut = rng.index(shorter + 1);
        Environment env = episodes.base();
        std::vector<int> seq(p1.actions.begin(), p1.actions.begin() + static_cast<std::ptrdiff_t>(cut));
        episodes.follow(env, seq);
        const std::span<const int> tail(p2.actions.data() + cut, p2.actions.size() - cut);
        const std::size_t taken = episodes.follow(env, tail);
        seq.insert(seq.end(), tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(taken));
        episodes.roll_out(env, seq, rng);
        ++episodes.evaluations;
        child = summarize(env, std::move(seq), "", 0);
      }
      if (u_mut < ga.mutation_prob) {
        const std::size_t cut = rng.index(child.actions.size() + 1);
        child = episodes.reroll(child.actions, cut, rng);
      }
      next.push_back(std::move(child));
    }
    spent += pop_size - elites;
    pop = std::move(next);
    const Solution gen_best = best_of(pop);
    if (better(gen_best, best)) best = gen_best;
    trace.push_back(best.objective);
  }
  best.method = "ga";
  best.seed = seed;
  best.evaluations = episodes.evaluations;
  best.best_trace = std::move(trace);
  return best;
}

void AcoConfig::validate() const {
  if (iterations < 1) throw ConfigError("baseline.aco_iterations must be >= 1");
  if (ants < 1) throw ConfigError("baseline.aco_ants must be >= 1");
  if (!(pheromone_weight >= 0.0)) throw ConfigError("baseline.aco_pheromone_weight must be >= 0");
  if (!(heuristic_weight >= 0.0)) throw ConfigError("baseline.aco_heuristic_weight must be >= 0");
  if (!(evaporation >= 0.0 && evaporation <= 1.0)) throw ConfigError("baseline.aco_evaporation must be in [0, 1]");
  if (!(pheromone_floor > 0.0)) throw ConfigError("baseline.aco_pheromone_floor must be > 0");
  if (!(initial_pheromone >= pheromone_floor)) throw ConfigError("baseline.aco_initial_pheromone must be >= floor");
}

Solution ant_colony(const City& city, const HeteroGraph& graph, const EnvConfig& config, const AcoConfig& aco,
                    std::uint64_t seed) {
  aco.validate();
  Episodes episodes(city, graph, config);
  Rng rng(seed);
  const Solution reference = greedy(city, graph, config);
  const bool od_only = config.beta == 0.0;
  auto value = [&](const Solution& s) { return od_only ? s.cod : s.objective; };
  const double ref_value = value(reference) > 0.0 ? value(reference) : 1.0;

  std::vector<double> tau(city.size(), aco.initial_pheromone);
  Solution best = reference;
  std::vector<double> trace;
  std::vector<double> logw;
  for (int it = 0; it < aco.iterations; ++it) {
    for (int ant = 0; ant < aco.ants; ++ant) {
      Environment env = episodes.base();
      std::vector<int> seq;
      while (!env.done()) {
        const auto nodes = env.mask().nodes();
        logw.assign(nodes.size(), 0.0);
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          logw[i] = aco.pheromone_weight * std::log(tau[static_cast<std::size_t>(nodes[i])]) +
                    aco.heuristic_weight * std::log(fd3(env, nodes[i]) + 1.0);
          top = std::max(top, logw[i]);
        }
        for (double& w : logw) w = std::exp(w - top);
        const int a = nodes[rng.categorical(logw)];
        env.step(a);
        seq.push_back(a);
      }
      ++episodes.evaluations;
      Solution s = summarize(env, std::move(seq), "", 0);
      if (better(s, best)) best = std::move(s);
    }
    for (double& t : tau) t = std::max(aco.pheromone_floor, (1.0 - aco.evaporation) * t);
    const double deposit = std::max(0.0, value(best) / ref_value);
    for (int node : best.actions) tau[static_cast<std::size_t>(node)] += deposit;
    trace.push_back(best.objective);
  }
  best.method = "aco";
  best.seed = seed;
  best.evaluations = episodes.evaluations + 1;
  best.best_trace = std::move(trace);
  return best;
}

std::string to_string(BaselineMethod method) {
  switch (method) {
    case BaselineMethod::Greedy: return "gs";
    case BaselineMethod::Annealing: return "sa";
    case BaselineMethod::Genetic: return "ga";
    case BaselineMethod::AntColony: return "aco";
  }
  return "gs";
}

BaselineMethod baseline_method_from_string(const std::string& name) {
  if (name == "gs") return BaselineMethod::Greedy;
  if (name == "sa") return BaselineMethod::Annealing;
  if (name == "ga") return BaselineMethod::Genetic;
  if (name == "aco") return BaselineMethod::AntColony;
  throw ConfigError("baseline method must be gs, sa, ga or aco, got '" + name + "'");
}

}  // namespace metroplan
