#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metroplan/agent.hpp"
#include "metroplan/baselines.hpp"
#include "metroplan/city.hpp"
#include "metroplan/env.hpp"
#include "metroplan/graph.hpp"
#include "metroplan/ppo.hpp"

namespace metroplan {

struct CitySection {
  std::string path;         // city file; empty = generate from k and seed
  int k = 20;
  std::uint64_t seed = 0;
  GenParams gen;
  bool merge = false;       // apply region merging after loading/generating
  MergeParams merge_params;
};

struct GraphSection {
  double t1 = kDefaultSpatialThresholdKm;
  double t2 = -1.0;                            // < 0: use t2_percentile
  double t2_percentile = kDefaultFlowPercentile;
};

struct TrainSection {
  int checkpoint_every = 10;
  bool deterministic = false;  // forces one rollout worker
};

struct BaselineSection {
  SaConfig sa;
  GaConfig ga;
  AcoConfig aco;
};

// Every tunable of a run. The JSON document has one object per section;
// each key is also a `--section.key` command-line flag.
struct RunConfig {
  CitySection city;
  GraphSection graph;
  EnvConfig env;
  AgentConfig agent;  // feature_dim is derived from the city, not configured
  PpoConfig ppo;
  TrainSection train;
  BaselineSection baseline;

  // Throws ConfigError for invalid values in any section.
  void validate() const;
};

struct ConfigKey {
  std::string section;
  std::string key;
  std::string type;           // real, integer, unsigned, boolean, string
  std::string description;
  std::string dotted() const { return section + "." + key; }
};

// All keys in document order.
const std::vector<ConfigKey>& config_keys();

// Parses text according to the key's type. Throws ConfigError for unknown
// keys or malformed values.
void set_config_value(RunConfig& config, const std::string& dotted_key, const std::string& text);
std::string get_config_value(const RunConfig& config, const std::string& dotted_key);

// Missing keys keep their defaults; unknown sections or keys throw
// ConfigError, as do wrongly typed values.
RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& config, const std::filesystem::path& path);

// The env section alone, for plan documents.
std::string env_config_to_json(const EnvConfig& env);
EnvConfig env_config_from_json(const std::string& text);

// City per the city section (loaded or generated, then optionally merged).
City make_city(const RunConfig& config);
HeteroGraph make_graph(const City& city, const RunConfig& config);
// Agent section with feature_dim filled in for the city.
AgentConfig agent_config_for(const City& city, const RunConfig& config);
// PPO section with workers forced to 1 under train.deterministic.
PpoConfig ppo_config_for(const RunConfig& config);

}  // namespace metroplan
