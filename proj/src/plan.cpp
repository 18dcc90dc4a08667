#include "metroplan/plan.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "io_util.hpp"
#include "metroplan/baselines.hpp"
#include "metroplan/config.hpp"
#include "metroplan/error.hpp"

namespace metroplan {

using json = nlohmann::json;

std::vector<int> Plan::action_ids() const {
  std::vector<int> out;
  for (const auto& a : actions) out.push_back(a.region_id);
  return out;
}

namespace {

std::vector<PlanStation> station_table(const MetroState& state, const City& city) {
  std::vector<PlanStation> out;
  for (int s : state.stations()) out.push_back({s, city.region(s).x_km, city.region(s).y_km});
  return out;
}

json lines_json(const std::vector<MetroLine>& lines) {
  json out = json::array();
  for (const auto& l : lines) out.push_back({{"line_id", l.line_id}, {"stations", l.stations}});
  return out;
}

std::vector<MetroLine> lines_from(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw ParseError(where + ": expected an array");
  std::vector<MetroLine> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    detail::FieldReader r(arr[i], where + "[" + std::to_string(i) + "]");
    out.push_back(MetroLine{r.integer("line_id"), r.int_array("stations")});
  }
  return out;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

}  // namespace

Plan make_plan(const City& city, const HeteroGraph& graph, const EnvConfig& config, std::span<const int> actions,
               std::string method, std::uint64_t seed) {
  Environment env(city, graph, config);
  env.reset();
  Plan plan;
  plan.method = std::move(method);
  plan.seed = seed;
  plan.env = config;
  plan.regions = city.size();
  plan.initial_lines = env.state().lines;
  plan.initial_cod = env.cod();
  plan.initial_ie = env.ie();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    StepOutcome out;
    try {
      out = env.step(actions[i]);
    } catch (const InvalidAction& e) {
      throw InvalidAction("plan step " + std::to_string(i) + ": " + e.what());
    }
    plan.actions.push_back({static_cast<int>(i), actions[i], out.info.mode, out.info.line_id, out.info.end,
                            out.info.cost});
  }
  plan.final_lines = env.state().lines;
  plan.stations = station_table(env.state(), city);
  plan.cod = env.cod();
  plan.ie = env.ie();
  plan.spend = env.spend();
  plan.objective = episode_objective(env);
  return plan;
}

std::string plan_to_json(const Plan& plan) {
  json actions = json::array();
  for (const auto& a : plan.actions)
    actions.push_back({{"step", a.step},
                       {"region_id", a.region_id},
                       {"mode", to_string(a.mode)},
                       {"line_id", a.line_id},
                       {"attach_end", a.attach_end == LineEnd::Front ? "front" : "back"},
                       {"cost", a.cost}});
  json stations = json::array();
  for (const auto& s : plan.stations) stations.push_back({{"region_id", s.region_id}, {"x_km", s.x_km}, {"y_km", s.y_km}});
  json doc = {{"format", 1},
              {"kind", "metroplan.plan"},
              {"method", plan.method},
              {"seed", plan.seed},
              {"regions", plan.regions},
              {"env", json::parse(env_config_to_json(plan.env))},
              {"actions", actions},
              {"initial_lines", lines_json(plan.initial_lines)},
              {"final_lines", lines_json(plan.final_lines)},
              {"stations", stations},
              {"metrics",
               {{"initial_cod", plan.initial_cod},
                {"cod", plan.cod},
                {"initial_ie", plan.initial_ie},
                {"ie", plan.ie},
                {"spend", plan.spend},
                {"budget", plan.env.budget},
                {"objective", plan.objective}}}};
  return doc.dump(2) + "\n";
}

Plan plan_from_json(const std::string& text) {
  const json doc = detail::parse_document(text, "plan");
  detail::FieldReader r(doc, "plan");
  if (r.integer("format") != 1) throw ParseError("plan.format: unsupported version");
  if (r.string("kind") != "metroplan.plan") throw ParseError("plan.kind: expected 'metroplan.plan'");
  Plan p;
  p.method = r.string("method");
  const auto& seed = r.at("seed");
  if (!seed.is_number_unsigned()) throw ParseError("plan.seed: expected a non-negative integer");
  p.seed = seed.get<std::uint64_t>();
  const int regions = r.integer("regions");
  if (regions < 0) throw ParseError("plan.regions: negative");
  p.regions = static_cast<std::size_t>(regions);
  try {
    p.env = env_config_from_json(r.at("env").dump());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("plan.env: ") + e.what());
  }
  const auto& actions = r.array("actions");
  for (std::size_t i = 0; i < actions.size(); ++i) {
    detail::FieldReader a(actions[i], "plan.actions[" + std::to_string(i) + "]");
    PlanAction act;
    act.step = a.integer("step");
    act.region_id = a.integer("region_id");
    try {
      act.mode = action_mode_from_string(a.string("mode"));
    } catch (const ParseError& e) {
      throw ParseError(a.path("mode") + ": " + e.what());
    }
    act.line_id = a.integer("line_id");
    const std::string end = a.string("attach_end");
    if (end != "front" && end != "back") throw ParseError(a.path("attach_end") + ": expected 'front' or 'back'");
    act.attach_end = end == "front" ? LineEnd::Front : LineEnd::Back;
    act.cost = a.number("cost");
    p.actions.push_back(act);
  }
  p.initial_lines = lines_from(r.array("initial_lines"), "plan.initial_lines");
  p.final_lines = lines_from(r.array("final_lines"), "plan.final_lines");
  const auto& stations = r.array("stations");
  for (std::size_t i = 0; i < stations.size(); ++i) {
    detail::FieldReader s(stations[i], "plan.stations[" + std::to_string(i) + "]");
    p.stations.push_back({s.integer("region_id"), s.number("x_km"), s.number("y_km")});
  }
  detail::FieldReader m(r.at("metrics"), "plan.metrics");
  p.initial_cod = m.number("initial_cod");
  p.cod = m.number("cod");
  p.initial_ie = m.number("initial_ie");
  p.ie = m.number("ie");
  p.spend = m.number("spend");
  p.objective = m.number("objective");
  return p;
}

void save_plan(const Plan& plan, const std::filesystem::path& path) {
  detail::write_text_file(path, plan_to_json(plan));
}

Plan load_plan(const std::filesystem::path& path) { return plan_from_json(detail::read_text_file(path)); }

Audit audit_plan(const Plan& plan, const City& city, const HeteroGraph& graph, const EnvConfig& config) {
  Audit audit;
  auto fail = [&](std::string msg) { audit.violations.push_back(std::move(msg)); };

  if (plan.regions != city.size())
    fail("plan is for " + std::to_string(plan.regions) + " regions, city has " + std::to_string(city.size()));

  Environment env(city, graph, config);
  env.reset();
  if (env.state().lines != plan.initial_lines) fail("initial lines differ from the configured initial network");
  int new_lines = 0;
  double spent = 0.0;
  for (const auto& a : plan.actions) {
    const std::string at = "step " + std::to_string(a.step) + " (region " + std::to_string(a.region_id) + ")";
    if (a.region_id < 0 || static_cast<std::size_t>(a.region_id) >= city.size()) {
      fail(at + ": region out of range");
      break;
    }
    if (!env.mask().allowed[static_cast<std::size_t>(a.region_id)]) {
      fail(at + ": action is not feasible in this state");
      break;
    }
    const Resolution& r = env.mask().resolution[static_cast<std::size_t>(a.region_id)];
    if (r.mode != a.mode || r.line_id != a.line_id || (r.mode == ActionMode::Extend && r.end != a.attach_end))
      fail(at + ": recorded mode/line/end does not match the feasible resolution");
    if (!close(r.cost, a.cost)) fail(at + ": recorded cost " + fmt(a.cost) + " != " + fmt(r.cost));
    if (r.mode == ActionMode::NewLine) ++new_lines;
    spent += r.cost;
    env.step(a.region_id);
  }

  if (new_lines > config.max_new_lines)
    fail("new lines " + std::to_string(new_lines) + " exceed quota " + std::to_string(config.max_new_lines));
  if (spent > config.budget * (1.0 + 1e-12)) fail("spend " + fmt(spent) + " exceeds budget " + fmt(config.budget));
  if (!close(plan.spend, env.spend())) fail("cached spend " + fmt(plan.spend) + " != " + fmt(env.spend()));
  if (plan.env.budget != config.budget) fail("plan budget " + fmt(plan.env.budget) + " != " + fmt(config.budget));

  // Geometry as the plan states it.
  std::map<int, PlanStation> coords;
  for (const auto& s : plan.stations) {
    coords[s.region_id] = s;
    if (s.region_id < 0 || static_cast<std::size_t>(s.region_id) >= city.size()) {
      fail("station " + std::to_string(s.region_id) + ": region out of range");
      continue;
    }
    const Region& reg = city.region(s.region_id);
    if (!close(reg.x_km, s.x_km) || !close(reg.y_km, s.y_km))
      fail("station " + std::to_string(s.region_id) + ": coordinates (" + fmt(s.x_km) + ", " + fmt(s.y_km) +
           ") differ from the city's (" + fmt(reg.x_km) + ", " + fmt(reg.y_km) + ")");
  }
  const double cos_min = std::cos(config.angle_min * std::numbers::pi / 180.0);
  for (const auto& line : plan.final_lines) {
    const std::string name = "line " + std::to_string(line.line_id);
    bool complete = true;
    for (int s : line.stations)
      if (!coords.count(s)) {
        fail(name + ": station " + std::to_string(s) + " has no coordinates");
        complete = false;
      }
    if (!complete) continue;
    for (std::size_t i = 0; i + 1 < line.stations.size(); ++i) {
      const auto& p = coords[line.stations[i]];
      const auto& q = coords[line.stations[i + 1]];
      const double d = std::hypot(p.x_km - q.x_km, p.y_km - q.y_km);
      if (d < config.t3 || d > config.t4)
        fail(name + ": spacing " + fmt(d) + " km between " + std::to_string(p.region_id) + " and " +
             std::to_string(q.region_id) + " outside [" + fmt(config.t3) + ", " + fmt(config.t4) + "]");
    }
    for (std::size_t i = 1; i + 1 < line.stations.size(); ++i) {
      const auto& a = coords[line.stations[i - 1]];
      const auto& b = coords[line.stations[i]];
      const auto& c = coords[line.stations[i + 1]];
      const double ux = a.x_km - b.x_km, uy = a.y_km - b.y_km, vx = c.x_km - b.x_km, vy = c.y_km - b.y_km;
      const double norms = std::hypot(ux, uy) * std::hypot(vx, vy);
      if (norms == 0.0 || ux * vx + uy * vy > cos_min * norms)
        fail(name + ": bend at " + std::to_string(b.region_id) + " sharper than " + fmt(config.angle_min) + " degrees");
    }
  }

  if (env.state().lines != plan.final_lines) fail("final lines differ from the replayed network");
  audit.cod = env.cod();
  audit.ie = env.ie();
  audit.spend = env.spend();
  if (!close(plan.cod, audit.cod)) fail("cached C_od " + fmt(plan.cod) + " != " + fmt(audit.cod));
  if (!close(plan.ie, audit.ie)) fail("cached IE " + fmt(plan.ie) + " != " + fmt(audit.ie));
  if (!close(plan.initial_cod, env.initial_cod())) fail("cached initial C_od differs from the replay");
  if (!close(plan.initial_ie, env.initial_ie())) fail("cached initial IE differs from the replay");
  return audit;
}

}  // namespace metroplan
