#include "metroplan/metro.hpp"

#include <algorithm>
#include <queue>

#include "metroplan/error.hpp"

namespace metroplan {

bool MetroLine::contains(int region) const {
  return std::find(stations.begin(), stations.end(), region) != stations.end();
}

std::vector<int> MetroState::stations() const {
  std::vector<int> out;
  for (const MetroLine& l : lines) out.insert(out.end(), l.stations.begin(), l.stations.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> MetroState::interchanges() const {
  std::vector<int> out;
  for (int s : stations())
    if (lines_at(s) >= 2) out.push_back(s);
  return out;
}

bool MetroState::is_station(int region) const {
  return std::any_of(lines.begin(), lines.end(), [&](const MetroLine& l) { return l.contains(region); });
}

int MetroState::lines_at(int region) const {
  return static_cast<int>(std::count_if(lines.begin(), lines.end(), [&](const MetroLine& l) { return l.contains(region); }));
}

std::vector<int> MetroState::terminals() const {
  std::vector<int> out;
  for (const MetroLine& l : lines) {
    out.push_back(l.front());
    out.push_back(l.back());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> MetroState::subterminals() const {
  std::vector<int> out;
  for (const MetroLine& l : lines) {
    if (l.stations.size() < 2) continue;
    out.push_back(l.stations[1]);
    out.push_back(l.stations[l.stations.size() - 2]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

const MetroLine& MetroState::line(int line_id) const {
  for (const MetroLine& l : lines)
    if (l.line_id == line_id) return l;
  throw InvalidArgument("unknown line id " + std::to_string(line_id));
}

MetroLine& MetroState::line(int line_id) {
  return const_cast<MetroLine&>(static_cast<const MetroState&>(*this).line(line_id));
}

void CostModel::validate() const {
  if (!(station_cost > 0.0) || !(interchange_cost > 0.0) || !(per_km_cost > 0.0))
    throw ConfigError("costs must all be > 0");
  if (interchange_cost < station_cost) throw ConfigError("interchange_cost must be >= station_cost");
}

std::string to_string(OdPairs mode) { return mode == OdPairs::Connected ? "connected" : "adjacent"; }

OdPairs od_pairs_from_string(const std::string& name) {
  if (name == "connected") return OdPairs::Connected;
  if (name == "adjacent") return OdPairs::Adjacent;
  throw ConfigError("od_pairs must be 'connected' or 'adjacent', got '" + name + "'");
}

double StationDistances::between(int region_a, int region_b) const {
  auto ia = std::lower_bound(regions.begin(), regions.end(), region_a);
  auto ib = std::lower_bound(regions.begin(), regions.end(), region_b);
  if (ia == regions.end() || *ia != region_a || ib == regions.end() || *ib != region_b) return kUnreachable;
  return at(static_cast<std::size_t>(ia - regions.begin()), static_cast<std::size_t>(ib - regions.begin()));
}

StationDistances path_distances(const MetroState& metro, const City& city) {
  StationDistances out;
  out.regions = metro.stations();
  const std::size_t n = out.regions.size();
  out.table.assign(n * n, kUnreachable);
  auto local = [&](int region) {
    return static_cast<std::size_t>(std::lower_bound(out.regions.begin(), out.regions.end(), region) -
                                    out.regions.begin());
  };

  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (const MetroLine& l : metro.lines) {
    for (std::size_t s = 1; s < l.stations.size(); ++s) {
      const std::size_t a = local(l.stations[s - 1]);
      const std::size_t b = local(l.stations[s]);
      const double w = city.distance(l.stations[s - 1], l.stations[s]);
      adj[a].emplace_back(b, w);
      adj[b].emplace_back(a, w);
    }
  }

  using Item = std::pair<double, std::size_t>;
  for (std::size_t src = 0; src < n; ++src) {
    double* dist = &out.table[src * n];
    dist[src] = 0.0;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.emplace(0.0, src);
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[u]) continue;
      for (const auto& [v, w] : adj[u]) {
        const double nd = d + w;
        if (nd < dist[v]) {
          dist[v] = nd;
          heap.emplace(nd, v);
        }
      }
    }
  }
  return out;
}

double satisfied_od(const MetroState& metro, const City& city, OdPairs mode) {
  const StationDistances dist = path_distances(metro, city);
  std::vector<std::pair<int, int>> segments;
  if (mode == OdPairs::Adjacent) {
    for (const MetroLine& l : metro.lines)
      for (std::size_t s = 1; s < l.stations.size(); ++s)
        segments.emplace_back(std::min(l.stations[s - 1], l.stations[s]), std::max(l.stations[s - 1], l.stations[s]));
    std::sort(segments.begin(), segments.end());
  }

  double total = 0.0;
  const std::size_t n = dist.size();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const int i = dist.regions[a];
      const int j = dist.regions[b];
      if (mode == OdPairs::Adjacent && !std::binary_search(segments.begin(), segments.end(), std::pair{i, j}))
        continue;
      const double path = dist.at(a, b);
      const double euc = city.distance(i, j);
      if (path == kUnreachable || euc == 0.0) continue;
      total += euc / path * city.symmetric_flow(i, j);
    }
  }
  return total;
}

std::vector<double> distance_to_network(const MetroState& metro, const City& city) {
  const std::vector<int> stations = metro.stations();
  std::vector<double> out(city.size(), kUnreachable);
  for (std::size_t i = 0; i < city.size(); ++i)
    for (int s : stations) out[i] = std::min(out[i], city.distance(static_cast<int>(i), s));
  return out;
}

double inequity(const MetroState& metro, const City& city) {
  if (metro.stations().empty()) throw InvalidState("inequity: the metro network has no stations");
  const std::vector<double> d = distance_to_network(metro, city);
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  return var / static_cast<double>(d.size());
}

double station_part_cost(const MetroState& metro, int node, const CostModel& costs) {
  return metro.is_station(node) ? costs.upgrade_cost() : costs.station_cost;
}

double extension_cost(const MetroState& metro, int line_id, LineEnd end, int node, const City& city,
                      const CostModel& costs) {
  const MetroLine& l = metro.line(line_id);
  const int terminal = end == LineEnd::Front ? l.front() : l.back();
  return station_part_cost(metro, node, costs) + costs.per_km_cost * city.distance(terminal, node);
}

double extension_cost(const MetroState& metro, int line_id, int node, const City& city, const CostModel& costs) {
  return std::min(extension_cost(metro, line_id, LineEnd::Front, node, city, costs),
                  extension_cost(metro, line_id, LineEnd::Back, node, city, costs));
}

double new_line_cost(const MetroState& metro, int node, [[maybe_unused]] const City& city, const CostModel& costs) {
  return station_part_cost(metro, node, costs);
}

}  // namespace metroplan
