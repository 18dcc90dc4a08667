#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "metroplan/baselines.hpp"
#include "metroplan/city_io.hpp"
#include "metroplan/config.hpp"
#include "metroplan/error.hpp"
#include "metroplan/gradcheck.hpp"
#include "metroplan/oracle.hpp"
#include "metroplan/plan.hpp"
#include "metroplan/ppo.hpp"

namespace py = pybind11;
using namespace metroplan;

namespace {

MetroState state_from_lines(const std::vector<std::vector<int>>& lines) {
  MetroState s;
  for (std::size_t i = 0; i < lines.size(); ++i) s.lines.push_back(MetroLine{static_cast<int>(i), lines[i]});
  return s;
}

std::vector<std::vector<int>> lines_of(const MetroState& s) {
  std::vector<std::vector<int>> out;
  for (const auto& l : s.lines) out.push_back(l.stations);
  return out;
}

std::string value_text(const py::handle& v) {
  if (py::isinstance<py::bool_>(v)) return v.cast<bool>() ? "true" : "false";
  return py::str(v).cast<std::string>();
}

py::dict step_info(const StepOutcome& o) {
  py::dict d;
  d["delta_cod"] = o.info.delta_cod;
  d["delta_ie"] = o.info.delta_ie;
  d["mode"] = o.info.mode == ActionMode::NewLine ? "new_line" : "extend";
  d["line_id"] = o.info.line_id;
  d["end"] = o.info.end == LineEnd::Front ? "front" : "back";
  d["cost"] = o.info.cost;
  return d;
}

// Owns the city and graph an Environment points into.
struct World {
  City city;
  HeteroGraph graph;
};

class PyEnvironment {
 public:
  PyEnvironment(const RunConfig& config)
      : world_(std::make_shared<World>()), config_(config) {
    world_->city = make_city(config);
    world_->graph = make_graph(world_->city, config);
    env_ = std::make_unique<Environment>(world_->city, world_->graph, config.env);
    env_->reset();
  }

  py::list reset(std::optional<std::uint64_t> seed) {
    if (seed) env_->reset(*seed);
    else env_->reset();
    return py::cast(lines_of(env_->state()));
  }

  py::tuple step(int node) {
    const StepOutcome o = env_->step(node);
    return py::make_tuple(o.reward, o.done, step_info(o));
  }

  const Environment& env() const { return *env_; }
  const City& city() const { return world_->city; }

 private:
  std::shared_ptr<World> world_;
  RunConfig config_;
  std::unique_ptr<Environment> env_;
};

Solution run_method(const City& city, const HeteroGraph& graph, const RunConfig& c, const std::string& method,
                    std::uint64_t seed) {
  switch (baseline_method_from_string(method)) {
    case BaselineMethod::Greedy: return greedy(city, graph, c.env);
    case BaselineMethod::Annealing: return simulated_annealing(city, graph, c.env, c.baseline.sa, seed);
    case BaselineMethod::Genetic: return genetic(city, graph, c.env, c.baseline.ga, seed);
    case BaselineMethod::AntColony: return ant_colony(city, graph, c.env, c.baseline.aco, seed);
  }
  return greedy(city, graph, c.env);
}

py::dict metrics_dict(const IterationMetrics& m) {
  return py::module_::import("json").attr("loads")(metrics_to_json_line(m));
}

}  // namespace

PYBIND11_MODULE(_metroplan, m) {
  m.doc() = "Metro network expansion planning";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", base);
  py::register_exception<ParseError>(m, "ParseError", validation);
  py::register_exception<InvalidAction>(m, "InvalidAction", validation);
  py::register_exception<InvalidState>(m, "InvalidState", base);
  py::register_exception<NumericError>(m, "NumericError", base);
  py::register_exception<GuardRefusal>(m, "GuardRefusal", base);

  py::class_<RunConfig>(m, "Config")
      .def(py::init<>())
      .def(py::init([](const py::kwargs& kw) {
        RunConfig c;
        for (const auto& [k, v] : kw) set_config_value(c, py::str(k).cast<std::string>(), value_text(v));
        return c;
      }))
      .def_static("from_json", &config_from_json)
      .def_static("load", [](const std::filesystem::path& p) { return load_config(p); })
      .def("to_json", &config_to_json)
      .def("save", [](const RunConfig& c, const std::filesystem::path& p) { save_config(c, p); })
      .def("validate", &RunConfig::validate)
      .def("get", &get_config_value, py::arg("key"))
      .def("set", [](RunConfig& c, const std::string& key, const py::object& v) { set_config_value(c, key, value_text(v)); })
      .def("__getitem__", &get_config_value)
      .def("__setitem__",
           [](RunConfig& c, const std::string& key, const py::object& v) { set_config_value(c, key, value_text(v)); })
      .def_static("keys", [] {
        std::vector<std::string> out;
        for (const auto& k : config_keys()) out.push_back(k.dotted());
        return out;
      })
      .def("__repr__", [](const RunConfig& c) { return "Config(" + config_to_json(c) + ")"; });

  py::class_<City>(m, "City")
      .def_static("generate", [](int k, std::uint64_t seed) { return generate_city(k, seed); }, py::arg("k"), py::arg("seed") = 0)
      .def_static("from_config", &make_city)
      .def_static("from_json", &city_from_json)
      .def_static("load", [](const std::filesystem::path& p) { return load_city(p); })
      .def("to_json", &city_to_json)
      .def("save", [](const City& c, const std::filesystem::path& p) { save_city(c, p); })
      .def("__len__", &City::size)
      .def("flow", &City::flow)
      .def("distance", &City::distance)
      .def_property_readonly("total_flow", &City::total_flow)
      .def_property_readonly("total_population", &City::total_population)
      .def_property_readonly("poi_categories", &City::poi_categories)
      .def_property_readonly("initial_lines", &City::initial_lines)
      .def_property_readonly("flows",
                             [](const City& c) {
                               const auto k = static_cast<py::ssize_t>(c.size());
                               py::array_t<double> a({k, k});
                               std::copy(c.flow_matrix().begin(), c.flow_matrix().end(), a.mutable_data());
                               return a;
                             })
      .def_property_readonly("regions", [](const City& c) {
        py::list out;
        for (const auto& r : c.regions()) {
          py::dict d;
          d["id"] = r.id;
          d["x_km"] = r.x_km;
          d["y_km"] = r.y_km;
          d["population"] = r.population;
          d["poi"] = r.poi;
          d["internal_trips"] = r.internal_trips;
          out.append(d);
        }
        return out;
      });

  py::class_<HeteroGraph>(m, "Graph")
      .def_static("from_config", &make_graph)
      .def_readonly("num_nodes", &HeteroGraph::num_nodes)
      .def_readonly("spatial_edges", &HeteroGraph::spatial_edges)
      .def_readonly("flow_edges", &HeteroGraph::flow_edges)
      .def_readonly("t1", &HeteroGraph::t1)
      .def_readonly("t2", &HeteroGraph::t2);

  m.def(
      "satisfied_od",
      [](const City& c, const std::vector<std::vector<int>>& lines) { return satisfied_od(state_from_lines(lines), c); },
      py::arg("city"), py::arg("lines"));
  m.def(
      "inequity", [](const City& c, const std::vector<std::vector<int>>& lines) { return inequity(state_from_lines(lines), c); },
      py::arg("city"), py::arg("lines"));

  py::class_<PyEnvironment>(m, "Environment")
      .def(py::init<const RunConfig&>(), py::arg("config"))
      .def("reset", &PyEnvironment::reset, py::arg("seed") = py::none())
      .def("step", &PyEnvironment::step, py::arg("node"))
      .def_property_readonly("feasible", [](const PyEnvironment& e) { return e.env().mask().nodes(); })
      .def_property_readonly("done", [](const PyEnvironment& e) { return e.env().done(); })
      .def_property_readonly("lines", [](const PyEnvironment& e) { return lines_of(e.env().state()); })
      .def_property_readonly("budget_remaining", [](const PyEnvironment& e) { return e.env().state().budget_remaining; })
      .def_property_readonly("new_lines_remaining",
                             [](const PyEnvironment& e) { return e.env().state().new_lines_remaining; })
      .def_property_readonly("cod", [](const PyEnvironment& e) { return e.env().cod(); })
      .def_property_readonly("ie", [](const PyEnvironment& e) { return e.env().ie(); })
      .def_property_readonly("initial_cod", [](const PyEnvironment& e) { return e.env().initial_cod(); })
      .def_property_readonly("initial_ie", [](const PyEnvironment& e) { return e.env().initial_ie(); })
      .def_property_readonly("spend", [](const PyEnvironment& e) { return e.env().spend(); })
      .def_property_readonly("reward_scale", [](const PyEnvironment& e) { return e.env().reward_scale(); })
      .def_property_readonly("city", &PyEnvironment::city, py::return_value_policy::copy);

  py::class_<Plan>(m, "Plan")
      .def_static("from_json", &plan_from_json)
      .def_static("load", [](const std::filesystem::path& p) { return load_plan(p); })
      .def("to_json", &plan_to_json)
      .def("save", [](const Plan& p, const std::filesystem::path& path) { save_plan(p, path); })
      .def("to_geojson", &plan_to_geojson)
      .def("to_svg", &plan_to_svg)
      .def_readonly("method", &Plan::method)
      .def_readonly("seed", &Plan::seed)
      .def_property_readonly("actions", &Plan::action_ids)
      .def_property_readonly("final_lines", [](const Plan& p) {
        std::vector<std::vector<int>> out;
        for (const auto& l : p.final_lines) out.push_back(l.stations);
        return out;
      })
      .def_readonly("initial_cod", &Plan::initial_cod)
      .def_readonly("cod", &Plan::cod)
      .def_readonly("initial_ie", &Plan::initial_ie)
      .def_readonly("ie", &Plan::ie)
      .def_readonly("spend", &Plan::spend)
      .def_readonly("objective", &Plan::objective);

  m.def(
      "baseline",
      [](const RunConfig& c, const std::string& method, std::uint64_t seed) {
        const City city = make_city(c);
        const HeteroGraph graph = make_graph(city, c);
        const Solution s = run_method(city, graph, c, method, seed);
        return make_plan(city, graph, c.env, s.actions, method, seed);
      },
      py::arg("config"), py::arg("method") = "gs", py::arg("seed") = 0);

  m.def(
      "audit",
      [](const Plan& plan, const RunConfig& c) {
        const City city = make_city(c);
        return audit_plan(plan, city, make_graph(city, c), c.env).violations;
      },
      py::arg("plan"), py::arg("config"));

  m.def(
      "oracle",
      [](const RunConfig& c, int depth, double guard) {
        const City city = make_city(c);
        const HeteroGraph graph = make_graph(city, c);
        const OracleResult r = enumerate_episodes(city, c.env, depth, guard);
        return make_plan(city, graph, c.env, r.actions, "oracle", 0);
      },
      py::arg("config"), py::arg("depth") = 1000, py::arg("guard") = kDefaultOracleGuard);

  m.def(
      "train",
      [](const RunConfig& c, const std::filesystem::path& out_dir) {
        const City city = make_city(c);
        const HeteroGraph graph = make_graph(city, c);
        TrainOptions o;
        o.out_dir = out_dir;
        o.checkpoint_every = c.train.checkpoint_every;
        o.config_echo = config_to_json(c);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(city, graph, c.env, agent_config_for(city, c), ppo_config_for(c), o);
        }
        py::list out;
        for (const auto& row : r.metrics) out.append(metrics_dict(row));
        return out;
      },
      py::arg("config"), py::arg("out_dir"));

  m.def(
      "rollout",
      [](const RunConfig& c, const std::filesystem::path& checkpoint, bool greedy_policy, std::uint64_t seed) {
        const City city = make_city(c);
        const HeteroGraph graph = make_graph(city, c);
        const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint);
        const AgentConfig agent = agent_config_from_checkpoint(ckpt);
        if (agent.feature_dim != feature_dim(city.poi_categories()))
          throw ValidationError("checkpoint does not match the city's features");
        const Trajectory t = run_episode(city, graph, c.env, ckpt.parameters, agent, seed, greedy_policy);
        return make_plan(city, graph, c.env, t.actions(), greedy_policy ? "agent-greedy" : "agent", seed);
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("greedy") = true, py::arg("seed") = 0);

  m.def(
      "gradient_check",
      [](std::uint64_t seed) {
        const GradCheckReport r = agent_gradient_check(seed);
        py::dict d;
        d["max_rel_error"] = r.max_rel_error;
        d["worst_parameter"] = r.worst_parameter;
        d["checked"] = r.checked;
        d["per_parameter"] = r.per_parameter;
        return d;
      },
      py::arg("seed") = 0);
}
