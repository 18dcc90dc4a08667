#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "metroplan/env.hpp"

namespace metroplan {

struct PlanAction {
  int step = 0;
  int region_id = 0;
  ActionMode mode = ActionMode::Extend;
  int line_id = 0;
  LineEnd attach_end = LineEnd::Back;
  double cost = 0.0;
  bool operator==(const PlanAction&) const = default;
};

struct PlanStation {
  int region_id = 0;
  double x_km = 0.0;
  double y_km = 0.0;
  bool operator==(const PlanStation&) const = default;
};

// An expansion plan: the action sequence, the networks before and after, and
// the cached outcome. Stations carry their planar coordinates so the plan can
// be drawn without the city file.
struct Plan {
  std::string method;
  std::uint64_t seed = 0;
  EnvConfig env;
  std::size_t regions = 0;
  std::vector<PlanAction> actions;
  std::vector<MetroLine> initial_lines;
  std::vector<MetroLine> final_lines;
  std::vector<PlanStation> stations;  // every final station, ascending id
  double initial_cod = 0.0, cod = 0.0;
  double initial_ie = 0.0, ie = 0.0;
  double spend = 0.0;
  double objective = 0.0;

  std::vector<int> action_ids() const;
};

// Replays actions through the environment. Throws InvalidAction for a
// masked-out action.
Plan make_plan(const City& city, const HeteroGraph& graph, const EnvConfig& config, std::span<const int> actions,
               std::string method, std::uint64_t seed);

// Plan document, format 1:
//   {"format": 1, "kind": "metroplan.plan", "method", "seed", "regions",
//    "env": {...env section...},
//    "actions": [{"step", "region_id", "mode", "line_id", "attach_end", "cost"}],
//    "initial_lines": [{"line_id", "stations": [...]}], "final_lines": [...],
//    "stations": [{"region_id", "x_km", "y_km"}],
//    "metrics": {"initial_cod", "cod", "initial_ie", "ie", "spend", "budget", "objective"}}
// attach_end is "front" or "back".
std::string plan_to_json(const Plan& plan);
// Throws ParseError naming the offending field.
Plan plan_from_json(const std::string& text);
void save_plan(const Plan& plan, const std::filesystem::path& path);
Plan load_plan(const std::filesystem::path& path);

struct Audit {
  std::vector<std::string> violations;
  double cod = 0.0, ie = 0.0, spend = 0.0;  // recomputed
  bool ok() const { return violations.empty(); }
};

// Re-verifies a plan against a city and env config: every action masked-in
// at its step with the recorded mode/line/end/cost, consecutive stations
// within [t3, t4], bends within [angle_min, 180], spend within budget, new
// lines within quota, embedded coordinates equal to the city's, final lines
// and cached values equal to the replay.
Audit audit_plan(const Plan& plan, const City& city, const HeteroGraph& graph, const EnvConfig& config);

// GeoJSON FeatureCollection in planar km coordinates (declared in a
// crs_note property): one LineString per final line, one Point per station.
std::string plan_to_geojson(const Plan& plan);

// Self-contained SVG drawing of the final network; initial lines are drawn
// underneath in grey.
std::string plan_to_svg(const Plan& plan);

}  // namespace metroplan
