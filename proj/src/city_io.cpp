#include "metroplan/city_io.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "metroplan/error.hpp"
#include "io_util.hpp"

namespace metroplan {

using nlohmann::json;

std::string city_to_json(const City& city) {
  json doc;
  doc["format"] = 1;
  json regions = json::array();
  for (const Region& r : city.regions()) {
    json jr = {{"id", r.id}, {"x_km", r.x_km}, {"y_km", r.y_km}, {"population", r.population}, {"poi", r.poi}};
    if (r.internal_trips != 0.0) jr["internal_trips"] = r.internal_trips;
    regions.push_back(std::move(jr));
  }
  doc["regions"] = std::move(regions);
  json flows = json::array();
  const int k = static_cast<int>(city.size());
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (const double f = city.flow(i, j); f != 0.0) flows.push_back(json::array({i, j, f}));
  doc["flows"] = std::move(flows);
  if (!city.initial_lines().empty()) doc["initial_lines"] = city.initial_lines();
  return doc.dump(1) + "\n";
}

City city_from_json(const std::string& text) {
  const json doc = detail::parse_document(text, "city");
  detail::FieldReader in(doc, "city");
  const int format = in.integer("format");
  if (format != 1) throw ParseError("city: unsupported format " + std::to_string(format));

  const json& jregions = in.array("regions");
  std::vector<Region> regions(jregions.size());
  std::vector<bool> seen(jregions.size(), false);
  for (std::size_t n = 0; n < jregions.size(); ++n) {
    detail::FieldReader r(jregions[n], "regions[" + std::to_string(n) + "]");
    const int id = r.integer("id");
    if (id < 0 || static_cast<std::size_t>(id) >= jregions.size())
      throw ParseError(r.path("id") + ": id " + std::to_string(id) + " outside 0.." +
                       std::to_string(jregions.size() - 1));
    if (seen[static_cast<std::size_t>(id)]) throw ParseError(r.path("id") + ": duplicate region id " + std::to_string(id));
    seen[static_cast<std::size_t>(id)] = true;
    Region& region = regions[static_cast<std::size_t>(id)];
    region.id = id;
    region.x_km = r.number("x_km");
    region.y_km = r.number("y_km");
    region.population = r.number("population");
    region.poi = r.number_array("poi");
    region.internal_trips = r.number_or("internal_trips", 0.0);
  }

  const std::size_t k = regions.size();
  std::vector<double> flows(k * k, 0.0);
  std::set<std::pair<long long, long long>> pairs;
  const json& jflows = in.array("flows");
  for (std::size_t n = 0; n < jflows.size(); ++n) {
    const std::string where = "flows[" + std::to_string(n) + "]";
    const json& t = jflows[n];
    if (!t.is_array() || t.size() != 3 || !t[0].is_number_integer() || !t[1].is_number_integer() ||
        !t[2].is_number())
      throw ParseError(where + ": expected [i, j, trips] with integer ids");
    const long long i = t[0].get<long long>();
    const long long j = t[1].get<long long>();
    const double trips = t[2].get<double>();
    if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= k || static_cast<std::size_t>(j) >= k)
      throw ParseError(where + ": region id out of range");
    if (!pairs.emplace(i, j).second) throw ParseError(where + ": duplicate entry for pair " + std::to_string(i) +
                                                      "->" + std::to_string(j));
    if (trips < 0.0) throw ValidationError(where + ": negative trips " + std::to_string(trips));
    if (i == j && trips != 0.0) throw ValidationError(where + ": self-flow on region " + std::to_string(i));
    flows[static_cast<std::size_t>(i) * k + static_cast<std::size_t>(j)] = trips;
  }

  std::vector<std::vector<int>> lines;
  if (doc.contains("initial_lines")) {
    const json& jl = in.array("initial_lines");
    for (std::size_t n = 0; n < jl.size(); ++n) {
      detail::FieldReader line(jl, "initial_lines");
      lines.push_back(line.int_array_at(n));
    }
  }
  return City(std::move(regions), std::move(flows), std::move(lines));
}

void save_city(const City& city, const std::filesystem::path& path) {
  detail::write_text_file(path, city_to_json(city));
}

City load_city(const std::filesystem::path& path) { return city_from_json(detail::read_text_file(path)); }

}  // namespace metroplan
