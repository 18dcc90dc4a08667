#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <set>

#include "json.hpp"
#include "metroplan/config.hpp"
#include "metroplan/error.hpp"

using namespace metroplan;
using json = nlohmann::json;

TEST_CASE("defaults validate and round-trip") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  const std::string text = config_to_json(c);
  CHECK(config_to_json(config_from_json(text)) == text);
  CHECK(config_to_json(config_from_json("{}")) == text);
}

TEST_CASE("every key appears once in the document and as a flag") {
  const json doc = json::parse(config_to_json(RunConfig{}));
  std::set<std::string> dotted;
  std::size_t in_doc = 0;
  for (const auto& [section, body] : doc.items()) in_doc += body.size();
  for (const auto& k : config_keys()) {
    CHECK_MESSAGE(dotted.insert(k.dotted()).second, k.dotted());
    REQUIRE_MESSAGE(doc.contains(k.section), k.section);
    CHECK_MESSAGE(doc[k.section].contains(k.key), k.dotted());
    CHECK_FALSE(k.description.empty());
  }
  CHECK(in_doc == config_keys().size());
}

TEST_CASE("set and get agree for every key") {
  RunConfig c;
  for (const auto& k : config_keys()) {
    const std::string before = get_config_value(c, k.dotted());
    set_config_value(c, k.dotted(), before);
    CHECK_MESSAGE(get_config_value(c, k.dotted()) == before, k.dotted());
  }
  set_config_value(c, "env.budget", "1234.5");
  CHECK(c.env.budget == 1234.5);
  set_config_value(c, "ppo.seed", "18446744073709551615");
  CHECK(c.ppo.seed == 18446744073709551615ULL);
  set_config_value(c, "env.strict_appendix", "true");
  CHECK(c.env.strict_appendix);
  set_config_value(c, "agent.layers", "3");
  CHECK(c.agent.layers == 3);
}

TEST_CASE("bad keys and values are configuration errors") {
  RunConfig c;
  CHECK_THROWS_AS(set_config_value(c, "env.nonsense", "1"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "budget", "1"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "env.budget", "lots"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "agent.layers", "2.5"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "ppo.seed", "-1"), ConfigError);
  CHECK_THROWS_AS(get_config_value(c, "ppo.nothing"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"env": {"budgets": 1}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"envs": {}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"env": {"budget": "high"}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"agent": {"layers": 1.5}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"env": {"strict_appendix": 1}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json("[1, 2]"), ConfigError);
}

TEST_CASE("validation covers every section") {
  RunConfig c;
  c.env.t3 = 5.0;
  c.env.t4 = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.agent.layers = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.ppo.gae_lambda = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.baseline.aco.ants = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.city.k = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.graph.t2_percentile = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("derived sections") {
  RunConfig c;
  c.city.k = 20;
  c.train.deterministic = true;
  c.ppo.workers = 4;
  const City city = make_city(c);
  CHECK(city.size() == 20);
  CHECK(city == generate_city(20, 0));
  CHECK(agent_config_for(city, c).feature_dim == feature_dim(city.poi_categories()));
  CHECK(ppo_config_for(c).workers == 1);
  c.graph.t2 = 1e12;
  CHECK(make_graph(city, c).flow_edges.empty());
}

TEST_CASE("file round trip and env section") {
  RunConfig c;
  c.env.budget = 777;
  c.baseline.sa.t0 = 3.5;
  const auto path = std::filesystem::temp_directory_path() / "metroplan_config_test.json";
  save_config(c, path);
  CHECK(config_to_json(load_config(path)) == config_to_json(c));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_config(path), IoError);
  const EnvConfig e = env_config_from_json(env_config_to_json(c.env));
  CHECK(e.budget == 777);
  CHECK(env_config_to_json(e) == env_config_to_json(c.env));
}
