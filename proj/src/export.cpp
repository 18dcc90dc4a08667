#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"
#include "metroplan/plan.hpp"

namespace metroplan {

using json = nlohmann::json;

namespace {

// Colours cycle per line id.
const char* line_colour(int line_id) {
  static const char* palette[] = {"#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4",
                                  "#42d4f4", "#f032e6", "#9a6324", "#469990", "#800000"};
  return palette[static_cast<std::size_t>(line_id) % (sizeof(palette) / sizeof(palette[0]))];
}

std::map<int, PlanStation> by_id(const Plan& plan) {
  std::map<int, PlanStation> m;
  for (const auto& s : plan.stations) m[s.region_id] = s;
  return m;
}

std::vector<int> added_stations(const Plan& plan) {
  std::vector<int> out;
  for (const auto& a : plan.actions) out.push_back(a.region_id);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::string plan_to_geojson(const Plan& plan) {
  const auto coords = by_id(plan);
  json features = json::array();
  for (const auto& line : plan.final_lines) {
    json pts = json::array();
    for (int s : line.stations) {
      const auto it = coords.find(s);
      if (it != coords.end()) pts.push_back({it->second.x_km, it->second.y_km});
    }
    const bool is_new = std::none_of(plan.initial_lines.begin(), plan.initial_lines.end(),
                                     [&](const MetroLine& l) { return l.line_id == line.line_id; });
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", pts.size() == 1 ? "Point" : "LineString"},
                                      {"coordinates", pts.size() == 1 ? pts[0] : pts}}},
                        {"properties", {{"kind", "line"},
                                        {"line_id", line.line_id},
                                        {"stations", line.stations},
                                        {"new_line", is_new},
                                        {"colour", line_colour(line.line_id)}}}});
  }
  const auto added = added_stations(plan);
  for (const auto& s : plan.stations) {
    int lines = 0;
    for (const auto& l : plan.final_lines) lines += l.contains(s.region_id) ? 1 : 0;
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Point"}, {"coordinates", {s.x_km, s.y_km}}}},
                        {"properties", {{"kind", "station"},
                                        {"region_id", s.region_id},
                                        {"lines", lines},
                                        {"interchange", lines > 1},
                                        {"added", std::binary_search(added.begin(), added.end(), s.region_id)}}}});
  }
  json doc = {{"type", "FeatureCollection"},
              {"properties", {{"crs_note", "planar coordinates in kilometres from the city's local origin; "
                                           "not longitude/latitude"},
                              {"method", plan.method},
                              {"seed", plan.seed},
                              {"cod", plan.cod},
                              {"ie", plan.ie},
                              {"spend", plan.spend}}},
              {"features", features}};
  return doc.dump(2) + "\n";
}

std::string plan_to_svg(const Plan& plan) {
  const auto coords = by_id(plan);
  double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
  if (!plan.stations.empty()) {
    min_x = max_x = plan.stations[0].x_km;
    min_y = max_y = plan.stations[0].y_km;
    for (const auto& s : plan.stations) {
      min_x = std::min(min_x, s.x_km);
      max_x = std::max(max_x, s.x_km);
      min_y = std::min(min_y, s.y_km);
      max_y = std::max(max_y, s.y_km);
    }
  }
  const double span = std::max({max_x - min_x, max_y - min_y, 1.0});
  const double size = 800.0, margin = 40.0;
  const double scale = (size - 2 * margin) / span;
  auto px = [&](double x) { return margin + (x - min_x) * scale; };
  auto py = [&](double y) { return size - margin - (y - min_y) * scale; };  // y grows upwards

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
     << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << size << "\" height=\"" << size << "\" style=\"fill:#ffffff\"/>\n";
  auto polyline = [&](const MetroLine& line, const std::string& style) {
    os << "  <polyline points=\"";
    bool first = true;
    for (int s : line.stations) {
      const auto it = coords.find(s);
      if (it == coords.end()) continue;
      if (!first) os << ' ';
      os << px(it->second.x_km) << ',' << py(it->second.y_km);
      first = false;
    }
    os << "\" style=\"" << style << "\"/>\n";
  };
  for (const auto& line : plan.initial_lines)
    polyline(line, "fill:none;stroke:#bbbbbb;stroke-width:9;stroke-linecap:round;stroke-linejoin:round");
  for (const auto& line : plan.final_lines)
    polyline(line, std::string("fill:none;stroke:") + line_colour(line.line_id) +
                       ";stroke-width:4;stroke-linecap:round;stroke-linejoin:round");
  const auto added = added_stations(plan);
  for (const auto& s : plan.stations) {
    const bool is_new = std::binary_search(added.begin(), added.end(), s.region_id);
    os << "  <circle cx=\"" << px(s.x_km) << "\" cy=\"" << py(s.y_km) << "\" r=\"" << (is_new ? 6 : 4)
       << "\" style=\"fill:" << (is_new ? "#000000" : "#ffffff") << ";stroke:#000000;stroke-width:1.5\"/>\n";
    os << "  <text x=\"" << px(s.x_km) + 7 << "\" y=\"" << py(s.y_km) - 7
       << "\" style=\"font-family:sans-serif;font-size:10px;fill:#333333\">" << s.region_id << "</text>\n";
  }
  os << std::setprecision(1);
  os << "  <text x=\"" << margin << "\" y=\"" << margin / 2 + 5
     << "\" style=\"font-family:sans-serif;font-size:14px;fill:#000000\">" << plan.method << " seed " << plan.seed
     << ": C_od " << plan.cod << ", IE " << std::setprecision(3) << plan.ie << ", spend " << std::setprecision(0)
     << plan.spend << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace metroplan
