#include "metroplan/config.hpp"

#include <functional>
#include <map>

#include "io_util.hpp"
#include "metroplan/city_io.hpp"
#include "metroplan/error.hpp"

namespace metroplan {

using json = nlohmann::json;

namespace {

struct Field {
  ConfigKey meta;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

template <class T>
const char* type_name() {
  if constexpr (std::is_same_v<T, double>) return "real";
  else if constexpr (std::is_same_v<T, bool>) return "boolean";
  else if constexpr (std::is_same_v<T, std::uint64_t>) return "unsigned";
  else if constexpr (std::is_same_v<T, std::string>) return "string";
  else return "integer";
}

template <class T>
T convert(const json& v, const std::string& name) {
  if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) throw ConfigError(name + ": expected a number");
    return v.get<double>();
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(name + ": expected true or false");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!v.is_number_unsigned()) throw ConfigError(name + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(name + ": expected a string");
    return v.get<std::string>();
  } else {
    if (!v.is_number_integer()) throw ConfigError(name + ": expected an integer");
    const auto x = v.get<long long>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
      throw ConfigError(name + ": out of range");
    return static_cast<int>(x);
  }
}

template <class T, class Access>
Field field(std::string section, std::string key, std::string description, Access access) {
  Field f;
  f.meta = {section, key, type_name<T>(), std::move(description)};
  const std::string name = section + "." + key;
  f.get = [access](const RunConfig& c) { return json(access(const_cast<RunConfig&>(c))); };
  f.set = [access, name](RunConfig& c, const json& v) { access(c) = convert<T>(v, name); };
  return f;
}

// Enum-valued keys are stored as their string names.
template <class E, class Access, class ToString, class FromString>
Field enum_field(std::string section, std::string key, std::string description, Access access, ToString to_str,
                 FromString from_str) {
  Field f;
  f.meta = {section, key, "string", std::move(description)};
  const std::string name = section + "." + key;
  f.get = [access, to_str](const RunConfig& c) { return json(to_str(access(const_cast<RunConfig&>(c)))); };
  f.set = [access, from_str, name](RunConfig& c, const json& v) {
    access(c) = from_str(convert<std::string>(v, name));
  };
  return f;
}

#define MP_FIELD(T, section, key, expr, doc) \
  field<T>(section, key, doc, [](RunConfig& c) -> T& { return expr; })

std::vector<Field> build_fields() {
  std::vector<Field> f;
  // city
  f.push_back(MP_FIELD(std::string, "city", "path", c.city.path, "city file to load; empty generates one"));
  f.push_back(MP_FIELD(int, "city", "k", c.city.k, "regions in a generated city"));
  f.push_back(MP_FIELD(std::uint64_t, "city", "seed", c.city.seed, "generator seed"));
  f.push_back(MP_FIELD(int, "city", "clusters", c.city.gen.clusters, "population centres"));
  f.push_back(MP_FIELD(double, "city", "gravity_exponent", c.city.gen.gravity_exponent, "OD distance decay"));
  f.push_back(MP_FIELD(double, "city", "side_km", c.city.gen.side_km, "square side in km; 0 derives it"));
  f.push_back(MP_FIELD(double, "city", "cell_km", c.city.gen.cell_km, "grid cell size in km"));
  f.push_back(MP_FIELD(double, "city", "jitter", c.city.gen.jitter, "centroid jitter, fraction of a cell"));
  f.push_back(MP_FIELD(int, "city", "poi_categories", c.city.gen.poi_categories, "POI categories"));
  f.push_back(MP_FIELD(double, "city", "peak_population", c.city.gen.peak_population, "cluster peak population"));
  f.push_back(MP_FIELD(double, "city", "base_population", c.city.gen.base_population, "background population"));
  f.push_back(MP_FIELD(double, "city", "flow_scale", c.city.gen.flow_scale, "gravity constant"));
  f.push_back(MP_FIELD(bool, "city", "merge", c.city.merge, "merge small regions"));
  f.push_back(MP_FIELD(double, "city", "merge_area", c.city.merge_params.area_threshold, "merge area threshold, km^2"));
  f.push_back(MP_FIELD(double, "city", "merge_distance", c.city.merge_params.dist_threshold, "merge distance threshold, km"));
  // graph
  f.push_back(MP_FIELD(double, "graph", "t1", c.graph.t1, "spatial edge distance threshold, km"));
  f.push_back(MP_FIELD(double, "graph", "t2", c.graph.t2, "flow edge threshold, trips; < 0 uses t2_percentile"));
  f.push_back(MP_FIELD(double, "graph", "t2_percentile", c.graph.t2_percentile, "flow percentile in (0, 1] for t2"));
  // env
  f.push_back(MP_FIELD(double, "env", "budget", c.env.budget, "construction budget"));
  f.push_back(MP_FIELD(int, "env", "initial_lines", c.env.initial_lines, "synthesized initial lines"));
  f.push_back(MP_FIELD(int, "env", "max_new_lines", c.env.max_new_lines, "new-line quota"));
  f.push_back(MP_FIELD(int, "env", "initial_line_length", c.env.initial_line_length, "stations per initial line"));
  f.push_back(MP_FIELD(double, "env", "t3", c.env.t3, "minimum station spacing, km"));
  f.push_back(MP_FIELD(double, "env", "t4", c.env.t4, "maximum station spacing, km"));
  f.push_back(MP_FIELD(double, "env", "angle_min", c.env.angle_min, "smallest bend angle, degrees"));
  f.push_back(MP_FIELD(double, "env", "alpha", c.env.alpha, "OD reward weight"));
  f.push_back(MP_FIELD(double, "env", "beta", c.env.beta, "equity reward weight"));
  f.push_back(MP_FIELD(bool, "env", "strict_appendix", c.env.strict_appendix, "forbid existing stations as actions"));
  f.push_back(enum_field<OdPairs>(
      "env", "od_pairs", "station pairs counted: connected or adjacent",
      [](RunConfig& c) -> OdPairs& { return c.env.od_pairs; }, [](OdPairs m) { return to_string(m); },
      [](const std::string& s) { return od_pairs_from_string(s); }));
  f.push_back(MP_FIELD(bool, "env", "new_line_proximity", c.env.new_line_proximity, "new lines start within t4 of a station"));
  f.push_back(MP_FIELD(double, "env", "station_cost", c.env.costs.station_cost, "cost of a station"));
  f.push_back(MP_FIELD(double, "env", "interchange_cost", c.env.costs.interchange_cost, "cost of an interchange"));
  f.push_back(MP_FIELD(double, "env", "per_km_cost", c.env.costs.per_km_cost, "track cost per km"));
  f.push_back(MP_FIELD(std::uint64_t, "env", "init_seed", c.env.init_seed, "initial-line synthesis seed"));
  // agent
  f.push_back(MP_FIELD(int, "agent", "hidden_dim", c.agent.hidden_dim, "GNN node dimension"));
  f.push_back(MP_FIELD(int, "agent", "layers", c.agent.layers, "message-passing layers"));
  f.push_back(MP_FIELD(int, "agent", "heads", c.agent.heads, "attention heads"));
  f.push_back(MP_FIELD(int, "agent", "policy_hidden", c.agent.policy_hidden, "policy MLP width"));
  f.push_back(MP_FIELD(int, "agent", "value_hidden", c.agent.value_hidden, "value MLP width"));
  f.push_back(enum_field<PolicyMask>(
      "agent", "policy_mask", "feasible or adjacency",
      [](RunConfig& c) -> PolicyMask& { return c.agent.policy_mask; }, [](PolicyMask m) { return to_string(m); },
      [](const std::string& s) { return policy_mask_from_string(s); }));
  // ppo
  f.push_back(MP_FIELD(double, "ppo", "gamma", c.ppo.gamma, "discount"));
  f.push_back(MP_FIELD(double, "ppo", "gae_lambda", c.ppo.gae_lambda, "GAE lambda"));
  f.push_back(MP_FIELD(double, "ppo", "entropy_coef", c.ppo.entropy_coef, "entropy loss weight"));
  f.push_back(MP_FIELD(double, "ppo", "value_coef", c.ppo.value_coef, "value loss weight"));
  f.push_back(MP_FIELD(double, "ppo", "clip_epsilon", c.ppo.clip_epsilon, "ratio clip"));
  f.push_back(MP_FIELD(int, "ppo", "epochs_per_batch", c.ppo.epochs_per_batch, "Adam steps per batch"));
  f.push_back(MP_FIELD(int, "ppo", "episodes_per_iteration", c.ppo.episodes_per_iteration, "episodes per batch"));
  f.push_back(MP_FIELD(int, "ppo", "iterations", c.ppo.iterations, "training iterations"));
  f.push_back(MP_FIELD(std::uint64_t, "ppo", "seed", c.ppo.seed, "training seed"));
  f.push_back(MP_FIELD(int, "ppo", "workers", c.ppo.workers, "rollout threads"));
  f.push_back(MP_FIELD(double, "ppo", "lr", c.ppo.adam.lr, "Adam learning rate"));
  f.push_back(MP_FIELD(double, "ppo", "beta1", c.ppo.adam.beta1, "Adam beta1"));
  f.push_back(MP_FIELD(double, "ppo", "beta2", c.ppo.adam.beta2, "Adam beta2"));
  f.push_back(MP_FIELD(double, "ppo", "adam_eps", c.ppo.adam.eps, "Adam epsilon"));
  f.push_back(MP_FIELD(double, "ppo", "weight_decay", c.ppo.adam.weight_decay, "Adam weight decay"));
  // train
  f.push_back(MP_FIELD(int, "train", "checkpoint_every", c.train.checkpoint_every, "iterations between checkpoints"));
  f.push_back(MP_FIELD(bool, "train", "deterministic", c.train.deterministic, "single rollout worker"));
  // baseline
  f.push_back(MP_FIELD(double, "baseline", "sa_t0", c.baseline.sa.t0, "SA initial temperature"));
  f.push_back(MP_FIELD(double, "baseline", "sa_cooling", c.baseline.sa.cooling, "SA cooling factor"));
  f.push_back(MP_FIELD(double, "baseline", "sa_t_min", c.baseline.sa.t_min, "SA final temperature"));
  f.push_back(MP_FIELD(int, "baseline", "sa_iters_per_temp", c.baseline.sa.iters_per_temp, "SA moves per temperature"));
  f.push_back(MP_FIELD(double, "baseline", "sa_min_reroll_fraction", c.baseline.sa.min_reroll_fraction,
                       "SA rejects shorter re-rolled suffixes"));
  f.push_back(MP_FIELD(int, "baseline", "ga_population", c.baseline.ga.population, "GA population"));
  f.push_back(MP_FIELD(int, "baseline", "ga_max_evaluations", c.baseline.ga.max_evaluations, "GA evaluation budget"));
  f.push_back(MP_FIELD(double, "baseline", "ga_crossover_prob", c.baseline.ga.crossover_prob, "GA crossover probability"));
  f.push_back(MP_FIELD(double, "baseline", "ga_mutation_prob", c.baseline.ga.mutation_prob, "GA mutation probability"));
  f.push_back(MP_FIELD(int, "baseline", "ga_tournament", c.baseline.ga.tournament, "GA tournament size"));
  f.push_back(MP_FIELD(int, "baseline", "ga_elitism", c.baseline.ga.elitism, "GA elites kept"));
  f.push_back(MP_FIELD(int, "baseline", "aco_iterations", c.baseline.aco.iterations, "ACO iterations"));
  f.push_back(MP_FIELD(int, "baseline", "aco_ants", c.baseline.aco.ants, "ants per iteration"));
  f.push_back(MP_FIELD(double, "baseline", "aco_pheromone_weight", c.baseline.aco.pheromone_weight, "pheromone exponent"));
  f.push_back(MP_FIELD(double, "baseline", "aco_heuristic_weight", c.baseline.aco.heuristic_weight, "heuristic exponent"));
  f.push_back(MP_FIELD(double, "baseline", "aco_evaporation", c.baseline.aco.evaporation, "evaporation rate"));
  f.push_back(MP_FIELD(double, "baseline", "aco_pheromone_floor", c.baseline.aco.pheromone_floor, "pheromone floor"));
  f.push_back(MP_FIELD(double, "baseline", "aco_initial_pheromone", c.baseline.aco.initial_pheromone, "initial pheromone"));
  return f;
}

#undef MP_FIELD

const std::vector<Field>& fields() {
  static const std::vector<Field> f = build_fields();
  return f;
}

const Field& find_field(const std::string& dotted) {
  for (const auto& f : fields())
    if (f.meta.dotted() == dotted) return f;
  throw ConfigError("unknown config key '" + dotted + "'");
}

json section_json(const RunConfig& c, const std::string& section) {
  json out = json::object();
  for (const auto& f : fields())
    if (f.meta.section == section) out[f.meta.key] = f.get(c);
  return out;
}

void apply_section(RunConfig& c, const std::string& section, const json& obj) {
  if (!obj.is_object()) throw ConfigError(section + ": expected an object");
  for (const auto& [key, value] : obj.items()) find_field(section + "." + key).set(c, value);
}

const std::vector<std::string>& sections() {
  static const std::vector<std::string> s = {"city", "graph", "env", "agent", "ppo", "train", "baseline"};
  return s;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& f : fields()) k.push_back(f.meta);
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& config, const std::string& dotted_key, const std::string& text) {
  const Field& f = find_field(dotted_key);
  const std::string& type = f.meta.type;
  json v;
  try {
    std::size_t used = 0;
    if (type == "real") {
      v = std::stod(text, &used);
    } else if (type == "integer") {
      v = std::stoll(text, &used);
    } else if (type == "unsigned") {
      if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
      v = static_cast<std::uint64_t>(std::stoull(text, &used));
    } else if (type == "boolean") {
      if (text == "true" || text == "1") v = true;
      else if (text == "false" || text == "0") v = false;
      else throw std::invalid_argument("boolean");
      used = text.size();
    } else {
      v = text;
      used = text.size();
    }
    if (used != text.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::logic_error&) {
    throw ConfigError(dotted_key + ": cannot read '" + text + "' as " + type);
  }
  f.set(config, v);
}

std::string get_config_value(const RunConfig& config, const std::string& dotted_key) {
  const json v = find_field(dotted_key).get(config);
  return v.is_string() ? v.get<std::string>() : v.dump();
}

RunConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = detail::parse_document(text, "config");
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: expected an object");
  RunConfig c;
  for (const auto& [section, obj] : doc.items()) {
    if (std::find(sections().begin(), sections().end(), section) == sections().end())
      throw ConfigError("unknown config section '" + section + "'");
    apply_section(c, section, obj);
  }
  return c;
}

std::string config_to_json(const RunConfig& config) {
  json doc = json::object();
  for (const auto& s : sections()) doc[s] = section_json(config, s);
  return doc.dump(2) + "\n";
}

RunConfig load_config(const std::filesystem::path& path) {
  return config_from_json(detail::read_text_file(path));
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
  detail::write_text_file(path, config_to_json(config));
}

std::string env_config_to_json(const EnvConfig& env) {
  RunConfig c;
  c.env = env;
  return section_json(c, "env").dump();
}

EnvConfig env_config_from_json(const std::string& text) {
  RunConfig c;
  apply_section(c, "env", detail::parse_document(text, "env config"));
  return c.env;
}

void RunConfig::validate() const {
  if (city.path.empty() && city.k < 4) throw ConfigError("city.k must be >= 4");
  if (city.merge && (city.merge_params.area_threshold < 0 || city.merge_params.dist_threshold < 0))
    throw ConfigError("city.merge_area and city.merge_distance must be >= 0");
  if (!(graph.t1 > 0.0)) throw ConfigError("graph.t1 must be > 0");
  if (graph.t2 < 0.0 && !(graph.t2_percentile > 0.0 && graph.t2_percentile <= 1.0))
    throw ConfigError("graph.t2_percentile must be in (0, 1]");
  env.validate();
  AgentConfig a = agent;
  a.feature_dim = 1;  // derived later; checked here only for the other fields
  a.validate();
  ppo.validate();
  if (train.checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  baseline.sa.validate();
  baseline.ga.validate();
  baseline.aco.validate();
}

City make_city(const RunConfig& config) {
  City city = config.city.path.empty() ? generate_city(config.city.k, config.city.seed, config.city.gen)
                                       : load_city(config.city.path);
  if (config.city.merge) city = merge_small_regions(city, config.city.merge_params);
  return city;
}

HeteroGraph make_graph(const City& city, const RunConfig& config) {
  const double t2 = config.graph.t2 >= 0.0 ? config.graph.t2 : flow_percentile(city, config.graph.t2_percentile);
  return build_graph(city, config.graph.t1, t2);
}

AgentConfig agent_config_for(const City& city, const RunConfig& config) {
  AgentConfig a = config.agent;
  a.feature_dim = feature_dim(city.poi_categories());
  return a;
}

PpoConfig ppo_config_for(const RunConfig& config) {
  PpoConfig p = config.ppo;
  if (config.train.deterministic) p.workers = 1;
  return p;
}

}  // namespace metroplan
