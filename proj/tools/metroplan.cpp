// metroplan: command-line front end.
//
// Exit codes: 0 success, 1 I/O or other failure, 2 configuration or usage
// error, 3 validation failure (bad input file, infeasible action, failed
// audit), 4 numeric failure (non-finite values, gradient check above
// tolerance), 5 refusal by the oracle size guard.

#include <chrono>
#include <fstream>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "metroplan/baselines.hpp"
#include "metroplan/city_io.hpp"
#include "metroplan/config.hpp"
#include "metroplan/error.hpp"
#include "metroplan/gradcheck.hpp"
#include "metroplan/oracle.hpp"
#include "metroplan/plan.hpp"
#include "metroplan/ppo.hpp"

namespace fs = std::filesystem;
using namespace metroplan;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write to " + path.string() + " failed");
}

// --config FILE plus one --section.key flag per config key.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "run config file (JSON)")->check(CLI::ExistingFile);
    for (const auto& key : config_keys()) {
      const std::string dotted = key.dotted();
      app->add_option_function<std::string>(
             "--" + dotted, [this, dotted](const std::string& v) { values[dotted] = v; },
             key.description + " [" + key.type + "]")
          ->group("Config keys");
    }
  }

  // Defaults, then the file, then flags.
  RunConfig resolve(std::optional<EnvConfig> env_fallback = std::nullopt) const {
    RunConfig c = file.empty() ? RunConfig{} : load_config(file);
    if (file.empty() && env_fallback) c.env = *env_fallback;
    for (const auto& [k, v] : values) set_config_value(c, k, v);
    c.validate();
    return c;
  }
};

void echo_config(const RunConfig& config, const fs::path& out) {
  write_file(out.string() + ".config.json", config_to_json(config));
}

void emit_plan(const Plan& plan, const std::string& out) {
  if (out.empty()) {
    std::cout << plan_to_json(plan);
  } else {
    save_plan(plan, out);
    std::cerr << "wrote " << out << "\n";
  }
}

void print_summary(const Plan& plan) {
  std::cerr << std::setprecision(10) << plan.method << ": C_od " << plan.initial_cod << " -> " << plan.cod << ", IE "
            << plan.initial_ie << " -> " << plan.ie << ", spend " << plan.spend << " / " << plan.env.budget << ", "
            << plan.actions.size() << " actions\n";
}

std::vector<int> parse_int_list(const std::string& text, const std::string& flag) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError(flag + ": cannot read '" + item + "' as an integer");
    }
  }
  if (out.empty()) throw ConfigError(flag + ": empty list");
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"metroplan: metro network expansion planning"};
  app.require_subcommand(1);

  // gen-city
  auto* gen = app.add_subcommand("gen-city", "generate a synthetic city file");
  ConfigFlags gen_cfg;
  gen_cfg.attach(gen);
  std::optional<int> gen_k;
  std::optional<std::uint64_t> gen_seed;
  std::string gen_out;
  gen->add_option("--k", gen_k, "number of regions (city.k)");
  gen->add_option("--seed", gen_seed, "generator seed (city.seed)");
  gen->add_option("--out", gen_out, "output city file")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train the agent with PPO");
  ConfigFlags train_cfg;
  train_cfg.attach(train_cmd);
  std::string train_out;
  std::string train_resume;
  bool train_det = false;
  train_cmd->add_option("--out-dir", train_out, "output directory")->required();
  train_cmd->add_option("--resume", train_resume, "checkpoint to resume from")->check(CLI::ExistingFile);
  train_cmd->add_flag("--deterministic", train_det, "single rollout worker (train.deterministic)");

  // rollout
  auto* roll = app.add_subcommand("rollout", "play one episode with a trained policy");
  ConfigFlags roll_cfg;
  roll_cfg.attach(roll);
  std::string roll_ckpt, roll_out;
  bool roll_greedy = false;
  std::uint64_t roll_seed = 0;
  roll->add_option("--checkpoint", roll_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  roll->add_flag("--greedy", roll_greedy, "take the most probable action at every step");
  roll->add_option("--seed", roll_seed, "sampling seed");
  roll->add_option("--out", roll_out, "plan file (stdout when omitted)");

  // baseline
  auto* base = app.add_subcommand("baseline", "run a heuristic baseline");
  ConfigFlags base_cfg;
  base_cfg.attach(base);
  std::string base_method = "gs", base_out;
  std::uint64_t base_seed = 0;
  base->add_option("--method", base_method, "gs, sa, ga or aco")->check(CLI::IsMember({"gs", "sa", "ga", "aco"}));
  base->add_option("--seed", base_seed, "baseline seed");
  base->add_option("--out", base_out, "plan file (stdout when omitted)");

  // eval
  auto* eval = app.add_subcommand("eval", "recompute and audit a plan");
  ConfigFlags eval_cfg;
  eval_cfg.attach(eval);
  std::string eval_plan, eval_city;
  eval->add_option("--plan", eval_plan, "plan file")->required()->check(CLI::ExistingFile);
  eval->add_option("--city", eval_city, "city file (default: per config)")->check(CLI::ExistingFile);

  // oracle
  auto* orc = app.add_subcommand("oracle", "exhaustive search for the best plan");
  ConfigFlags orc_cfg;
  orc_cfg.attach(orc);
  double orc_guard = kDefaultOracleGuard;
  int orc_depth = 1000;
  std::string orc_out;
  orc->add_option("--depth-guard", orc_guard, "refuse when the size estimate exceeds this");
  orc->add_option("--depth", orc_depth, "maximum actions per sequence");
  orc->add_option("--out", orc_out, "plan file (stdout when omitted)");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "full-agent gradient check against finite differences");
  std::uint64_t gc_seed = 0;
  double gc_tol = 1e-4;
  gc->add_option("--seed", gc_seed, "city and parameter seed");
  gc->add_option("--tolerance", gc_tol, "maximum relative error");

  // export
  auto* exp = app.add_subcommand("export", "draw a plan as GeoJSON or SVG");
  std::string exp_plan, exp_format = "geojson", exp_out;
  exp->add_option("--plan", exp_plan, "plan file")->required()->check(CLI::ExistingFile);
  exp->add_option("--format", exp_format, "geojson or svg")->check(CLI::IsMember({"geojson", "svg"}));
  exp->add_option("--out", exp_out, "output file")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "train over GNN depth and width and tabulate");
  ConfigFlags sweep_cfg;
  sweep_cfg.attach(sweep);
  std::string sweep_layers = "1,2,3", sweep_dims = "8,16,32,64", sweep_out;
  sweep->add_option("--layers", sweep_layers, "comma-separated layer counts");
  sweep->add_option("--dims", sweep_dims, "comma-separated hidden dimensions");
  sweep->add_option("--out", sweep_out, "CSV table file");

  // config
  auto* cfg_cmd = app.add_subcommand("config", "print the resolved config");
  ConfigFlags cfg_cfg;
  cfg_cfg.attach(cfg_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*gen) {
    RunConfig c = gen_cfg.resolve();
    if (gen_k) c.city.k = *gen_k;
    if (gen_seed) c.city.seed = *gen_seed;
    c.city.path.clear();
    c.validate();
    const City city = make_city(c);
    save_city(city, gen_out);
    std::cerr << "wrote " << gen_out << " (" << city.size() << " regions)\n";
    return 0;
  }

  if (*train_cmd) {
    RunConfig c = train_cfg.resolve();
    if (train_det) c.train.deterministic = true;
    const City city = make_city(c);
    const HeteroGraph graph = make_graph(city, c);
    TrainOptions opts;
    opts.out_dir = train_out;
    opts.checkpoint_every = c.train.checkpoint_every;
    if (!train_resume.empty()) opts.resume = fs::path(train_resume);
    opts.config_echo = config_to_json(c);
    const TrainResult r = train(city, graph, c.env, agent_config_for(city, c), ppo_config_for(c), opts);
    for (const auto& m : r.metrics)
      std::cerr << "iter " << m.iteration << " mean C_od " << m.mean_cod << " entropy " << m.loss.entropy << "\n";
    std::cerr << "wrote " << (fs::path(train_out) / "checkpoint.json").string() << "\n";
    return 0;
  }

  if (*roll) {
    const RunConfig c = roll_cfg.resolve();
    const City city = make_city(c);
    const HeteroGraph graph = make_graph(city, c);
    const nn::Checkpoint ckpt = nn::load_checkpoint(roll_ckpt);
    const AgentConfig agent = agent_config_from_checkpoint(ckpt);
    if (agent.feature_dim != feature_dim(city.poi_categories()))
      throw ValidationError("checkpoint expects " + std::to_string(agent.feature_dim) +
                            " features, the city provides " + std::to_string(feature_dim(city.poi_categories())));
    const Trajectory t = run_episode(city, graph, c.env, ckpt.parameters, agent, roll_seed, roll_greedy);
    const Plan plan = make_plan(city, graph, c.env, t.actions(), roll_greedy ? "agent-greedy" : "agent", roll_seed);
    print_summary(plan);
    emit_plan(plan, roll_out);
    if (!roll_out.empty()) echo_config(c, roll_out);
    return 0;
  }

  if (*base) {
    const RunConfig c = base_cfg.resolve();
    const City city = make_city(c);
    const HeteroGraph graph = make_graph(city, c);
    Solution s;
    switch (baseline_method_from_string(base_method)) {
      case BaselineMethod::Greedy: s = greedy(city, graph, c.env); break;
      case BaselineMethod::Annealing: s = simulated_annealing(city, graph, c.env, c.baseline.sa, base_seed); break;
      case BaselineMethod::Genetic: s = genetic(city, graph, c.env, c.baseline.ga, base_seed); break;
      case BaselineMethod::AntColony: s = ant_colony(city, graph, c.env, c.baseline.aco, base_seed); break;
    }
    const Plan plan = make_plan(city, graph, c.env, s.actions, base_method, base_seed);
    print_summary(plan);
    emit_plan(plan, base_out);
    if (!base_out.empty()) echo_config(c, base_out);
    return 0;
  }

  if (*eval) {
    const Plan plan = load_plan(eval_plan);
    const RunConfig c = eval_cfg.resolve(plan.env);
    const City city = eval_city.empty() ? make_city(c) : load_city(eval_city);
    const HeteroGraph graph = make_graph(city, c);
    const Audit audit = audit_plan(plan, city, graph, c.env);
    std::cout << std::setprecision(17);
    std::cout << "method  " << plan.method << "\n";
    std::cout << "C_od    " << audit.cod << " (plan " << plan.cod << ")\n";
    std::cout << "IE      " << audit.ie << " (plan " << plan.ie << ")\n";
    std::cout << "spend   " << audit.spend << " (plan " << plan.spend << ", budget " << c.env.budget << ")\n";
    std::cout << "actions " << plan.actions.size() << "\n";
    if (audit.ok()) {
      std::cout << "audit   pass\n";
      return 0;
    }
    std::cout << "audit   FAIL (" << audit.violations.size() << " violations)\n";
    for (const auto& v : audit.violations) std::cout << "  - " << v << "\n";
    return 3;
  }

  if (*orc) {
    const RunConfig c = orc_cfg.resolve();
    const City city = make_city(c);
    const HeteroGraph graph = make_graph(city, c);
    const OracleResult r = enumerate_episodes(city, c.env, orc_depth, orc_guard);
    const Plan plan = make_plan(city, graph, c.env, r.actions, "oracle", 0);
    std::cerr << "oracle: " << r.leaves << " sequences (estimate " << r.estimate << ")\n";
    print_summary(plan);
    emit_plan(plan, orc_out);
    if (!orc_out.empty()) echo_config(c, orc_out);
    return 0;
  }

  if (*gc) {
    const auto t0 = std::chrono::steady_clock::now();
    const GradCheckReport r = agent_gradient_check(gc_seed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << std::setprecision(6);
    for (const auto& [name, err] : r.per_parameter) std::cout << std::left << std::setw(40) << name << err << "\n";
    std::cout << "checked " << r.checked << " scalars in " << secs << " s\n";
    std::cout << "max relative error " << r.max_rel_error << " at " << r.worst_parameter << "[" << r.worst_index
              << "] (analytic " << r.worst_analytic << ", numeric " << r.worst_numeric << ")\n";
    if (r.max_rel_error > gc_tol) {
      std::cout << "FAIL: above tolerance " << gc_tol << "\n";
      return 4;
    }
    std::cout << "pass\n";
    return 0;
  }

  if (*exp) {
    const Plan plan = load_plan(exp_plan);
    write_file(exp_out, exp_format == "svg" ? plan_to_svg(plan) : plan_to_geojson(plan));
    std::cerr << "wrote " << exp_out << "\n";
    return 0;
  }

  if (*sweep) {
    const RunConfig c = sweep_cfg.resolve();
    const auto layers = parse_int_list(sweep_layers, "--layers");
    const auto dims = parse_int_list(sweep_dims, "--dims");
    const City city = make_city(c);
    const HeteroGraph graph = make_graph(city, c);
    std::ostringstream csv;
    csv << "layers,hidden_dim,parameters,iterations,final_mean_cod,greedy_cod,greedy_cod_untrained,seconds\n";
    std::cout << "| layers | hidden_dim | parameters | final mean C_od | greedy C_od | untrained greedy C_od | seconds |\n";
    std::cout << "|---|---|---|---|---|---|---|\n";
    for (int l : layers) {
      for (int d : dims) {
        RunConfig rc = c;
        rc.agent.layers = l;
        rc.agent.hidden_dim = d;
        const AgentConfig agent = agent_config_for(city, rc);
        agent.validate();
        const auto t0 = std::chrono::steady_clock::now();
        Trainer trainer(city, graph, rc.env, agent, ppo_config_for(rc));
        const double before = run_episode(city, graph, rc.env, trainer.params(), agent, 0, true).final_cod;
        IterationMetrics last;
        for (int i = 0; i < rc.ppo.iterations; ++i) last = trainer.step();
        const double after = run_episode(city, graph, rc.env, trainer.params(), agent, 0, true).final_cod;
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const std::size_t n_params = trainer.params().scalar_count();
        csv << l << ',' << d << ',' << n_params << ',' << rc.ppo.iterations << ',' << std::setprecision(10)
            << last.mean_cod << ',' << after << ',' << before << ',' << std::setprecision(4) << secs << "\n";
        std::cout << "| " << l << " | " << d << " | " << n_params << " | " << std::setprecision(10) << last.mean_cod
                  << " | " << after << " | " << before << " | " << std::setprecision(4) << secs << " |\n";
      }
    }
    if (!sweep_out.empty()) {
      write_file(sweep_out, csv.str());
      echo_config(c, sweep_out);
      std::cerr << "wrote " << sweep_out << "\n";
    }
    return 0;
  }

  if (*cfg_cmd) {
    std::cout << config_to_json(cfg_cfg.resolve());
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
