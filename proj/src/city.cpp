#include "metroplan/city.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "metroplan/error.hpp"
#include "metroplan/random.hpp"

namespace metroplan {

City::City(std::vector<Region> regions, std::vector<double> flows,
           std::vector<std::vector<int>> initial_lines)
    : regions_(std::move(regions)), flows_(std::move(flows)), initial_lines_(std::move(initial_lines)) {
  const std::size_t k = regions_.size();
  const std::size_t categories = poi_categories();
  for (std::size_t i = 0; i < k; ++i) {
    const Region& r = regions_[i];
    const std::string where = "region " + std::to_string(i);
    if (r.id != static_cast<int>(i))
      throw ValidationError(where + ": id " + std::to_string(r.id) + " breaks dense 0..k-1 numbering");
    if (!std::isfinite(r.x_km) || !std::isfinite(r.y_km))
      throw ValidationError(where + ": non-finite coordinates");
    if (!std::isfinite(r.population) || r.population < 0.0)
      throw ValidationError(where + ": population must be finite and >= 0");
    if (!std::isfinite(r.internal_trips) || r.internal_trips < 0.0)
      throw ValidationError(where + ": internal_trips must be finite and >= 0");
    if (r.poi.size() != categories)
      throw ValidationError(where + ": expected " + std::to_string(categories) + " POI categories");
    for (double c : r.poi)
      if (!std::isfinite(c) || c < 0.0) throw ValidationError(where + ": POI counts must be finite and >= 0");
  }
  if (flows_.size() != k * k)
    throw ValidationError("flow matrix has " + std::to_string(flows_.size()) + " entries, expected " +
                          std::to_string(k * k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double f = flows_[i * k + j];
      if (!std::isfinite(f) || f < 0.0)
        throw ValidationError("flow " + std::to_string(i) + "->" + std::to_string(j) +
                              " must be finite and >= 0");
      if (i == j && f != 0.0) throw ValidationError("flow diagonal must be zero (region " + std::to_string(i) + ")");
    }
  }
  for (std::size_t l = 0; l < initial_lines_.size(); ++l) {
    const auto& line = initial_lines_[l];
    if (line.empty()) throw ValidationError("initial line " + std::to_string(l) + " is empty");
    for (int s : line)
      if (s < 0 || static_cast<std::size_t>(s) >= k)
        throw ValidationError("initial line " + std::to_string(l) + " references unknown region " +
                              std::to_string(s));
  }
}

double City::total_flow() const {
  double total = 0.0;
  for (double f : flows_) total += f;
  return total;
}

double City::total_population() const {
  double total = 0.0;
  for (const Region& r : regions_) total += r.population;
  return total;
}

double City::distance(int i, int j) const {
  const Region& a = region(i);
  const Region& b = region(j);
  return std::hypot(a.x_km - b.x_km, a.y_km - b.y_km);
}

City generate_city(int k, std::uint64_t seed, const GenParams& params) {
  if (k < 4) throw InvalidArgument("generate_city: k must be >= 4, got " + std::to_string(k));
  if (params.clusters < 1 || params.poi_categories < 0 || params.jitter < 0.0 || params.jitter > 1.0 ||
      params.flow_scale < 0.0 || params.cell_km <= 0.0 || params.side_km < 0.0)
    throw InvalidArgument("generate_city: invalid generator parameters");

  Rng rng(seed);
  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k))));
  const double side = params.side_km > 0.0 ? params.side_km : params.cell_km * grid;
  const double cell = side / grid;

  std::vector<int> cells(static_cast<std::size_t>(grid * grid));
  std::iota(cells.begin(), cells.end(), 0);
  for (std::size_t i = cells.size() - 1; i > 0; --i) std::swap(cells[i], cells[rng.index(i + 1)]);
  cells.resize(static_cast<std::size_t>(k));
  std::sort(cells.begin(), cells.end());

  std::vector<Region> regions(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int row = cells[static_cast<std::size_t>(i)] / grid;
    const int col = cells[static_cast<std::size_t>(i)] % grid;
    Region& r = regions[static_cast<std::size_t>(i)];
    r.id = i;
    r.x_km = (col + 0.5) * cell + (rng.uniform() - 0.5) * params.jitter * cell;
    r.y_km = (row + 0.5) * cell + (rng.uniform() - 0.5) * params.jitter * cell;
  }

  struct Cluster {
    double x, y, sigma, amplitude;
  };
  std::vector<Cluster> clusters;
  for (int c = 0; c < params.clusters; ++c) {
    Cluster cl{};
    cl.x = rng.uniform(0.0, side);
    cl.y = rng.uniform(0.0, side);
    cl.sigma = side * rng.uniform(0.1, 0.25);
    cl.amplitude = params.peak_population * rng.uniform(0.5, 1.0);
    clusters.push_back(cl);
  }
  for (Region& r : regions) {
    double pop = params.base_population * (0.5 + rng.uniform());
    for (const Cluster& cl : clusters) {
      const double d2 = (r.x_km - cl.x) * (r.x_km - cl.x) + (r.y_km - cl.y) * (r.y_km - cl.y);
      pop += cl.amplitude * std::exp(-d2 / (2.0 * cl.sigma * cl.sigma));
    }
    r.population = std::round(pop);
  }

  std::vector<double> category_weight(static_cast<std::size_t>(params.poi_categories));
  for (double& w : category_weight) w = rng.uniform(0.5, 2.0);
  for (Region& r : regions) {
    r.poi.resize(category_weight.size());
    for (std::size_t c = 0; c < category_weight.size(); ++c)
      r.poi[c] = std::round(r.population / 1000.0 * category_weight[c] * rng.uniform(0.5, 1.5));
  }

  const auto n = static_cast<std::size_t>(k);
  std::vector<double> flows(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::hypot(regions[i].x_km - regions[j].x_km, regions[i].y_km - regions[j].y_km);
      const double f = std::round(params.flow_scale * regions[i].population * regions[j].population /
                                  std::pow(std::max(d, 0.5), params.gravity_exponent));
      flows[i * n + j] = f;
      flows[j * n + i] = f;
    }
  }
  return City(std::move(regions), std::move(flows));
}

namespace {

struct Vec2 {
  double x, y;
};

double polygon_area(const std::vector<Vec2>& poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice) * 0.5;
}

// Keeps the part of poly with n.x * x + n.y * y <= c.
std::vector<Vec2> clip(const std::vector<Vec2>& poly, Vec2 n, double c) {
  std::vector<Vec2> out;
  if (poly.empty()) return out;
  auto side = [&](const Vec2& p) { return n.x * p.x + n.y * p.y - c; };
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& cur = poly[i];
    const Vec2& next = poly[(i + 1) % poly.size()];
    const double sc = side(cur);
    const double sn = side(next);
    if (sc <= 0.0) out.push_back(cur);
    if ((sc < 0.0 && sn > 0.0) || (sc > 0.0 && sn < 0.0)) {
      const double t = sc / (sc - sn);
      out.push_back({cur.x + t * (next.x - cur.x), cur.y + t * (next.y - cur.y)});
    }
  }
  return out;
}

}  // namespace

std::vector<double> voronoi_areas(const City& city) {
  const auto& regions = city.regions();
  std::vector<double> areas(regions.size(), 0.0);
  if (regions.empty()) return areas;
  double min_x = regions[0].x_km, min_y = regions[0].y_km;
  double max_x = min_x, max_y = min_y;
  for (const Region& r : regions) {
    min_x = std::min(min_x, r.x_km);
    min_y = std::min(min_y, r.y_km);
    max_x = std::max(max_x, r.x_km);
    max_y = std::max(max_y, r.y_km);
  }
  const double side = std::max(max_x - min_x, max_y - min_y);
  const std::vector<Vec2> square = {
      {min_x, min_y}, {min_x + side, min_y}, {min_x + side, min_y + side}, {min_x, min_y + side}};

  for (std::size_t i = 0; i < regions.size(); ++i) {
    const Vec2 si{regions[i].x_km, regions[i].y_km};
    std::vector<Vec2> cell = square;
    bool shadowed = false;
    for (std::size_t j = 0; j < regions.size() && !cell.empty(); ++j) {
      if (j == i) continue;
      const Vec2 sj{regions[j].x_km, regions[j].y_km};
      if (sj.x == si.x && sj.y == si.y) {
        if (j < i) shadowed = true;
        continue;
      }
      const Vec2 normal{sj.x - si.x, sj.y - si.y};
      const double c = 0.5 * ((sj.x * sj.x + sj.y * sj.y) - (si.x * si.x + si.y * si.y));
      cell = clip(cell, normal, c);
    }
    areas[i] = shadowed || cell.size() < 3 ? 0.0 : polygon_area(cell);
  }
  return areas;
}

City merge_small_regions(const City& city, double area_threshold, double dist_threshold) {
  if (!(area_threshold >= 0.0) || !(dist_threshold >= 0.0))
    throw InvalidArgument("merge_small_regions: thresholds must be >= 0");
  const std::size_t k = city.size();
  const std::vector<double> areas = voronoi_areas(city);

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return areas[a] < areas[b]; });

  std::vector<int> target(k);  // merge target, or self when alive
  std::iota(target.begin(), target.end(), 0);
  std::size_t alive = k;
  for (std::size_t i : order) {
    if (!(areas[i] < area_threshold)) continue;
    int nearest = -1;
    double best = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i || target[j] != static_cast<int>(j)) continue;
      const double d = city.distance(static_cast<int>(i), static_cast<int>(j));
      if (nearest < 0 || d < best) {
        nearest = static_cast<int>(j);
        best = d;
      }
    }
    if (nearest < 0 || !(best < dist_threshold)) continue;
    if (alive <= 2)
      throw InvalidArgument("merge_small_regions: merging would leave fewer than 2 regions");
    target[i] = nearest;
    --alive;
  }

  auto root = [&](std::size_t i) {
    while (target[i] != static_cast<int>(i)) i = static_cast<std::size_t>(target[i]);
    return i;
  };
  std::vector<int> new_id(k, -1);
  int next = 0;
  for (std::size_t i = 0; i < k; ++i)
    if (target[i] == static_cast<int>(i)) new_id[i] = next++;
  std::vector<int> group(k);
  for (std::size_t i = 0; i < k; ++i) group[i] = new_id[root(i)];

  const auto m = static_cast<std::size_t>(next);
  std::vector<Region> regions(m);
  for (std::size_t i = 0; i < k; ++i) {
    if (target[i] != static_cast<int>(i)) continue;
    regions[static_cast<std::size_t>(new_id[i])] = city.regions()[i];
    Region& r = regions[static_cast<std::size_t>(new_id[i])];
    r.id = new_id[i];
    r.population = 0.0;
    r.internal_trips = 0.0;
    std::fill(r.poi.begin(), r.poi.end(), 0.0);
  }
  for (std::size_t i = 0; i < k; ++i) {
    const Region& src = city.regions()[i];
    Region& dst = regions[static_cast<std::size_t>(group[i])];
    dst.population += src.population;
    dst.internal_trips += src.internal_trips;
    for (std::size_t c = 0; c < dst.poi.size(); ++c) dst.poi[c] += src.poi[c];
  }
  std::vector<double> flows(m * m, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double f = city.flow(static_cast<int>(i), static_cast<int>(j));
      if (f == 0.0) continue;
      const auto a = static_cast<std::size_t>(group[i]);
      const auto b = static_cast<std::size_t>(group[j]);
      if (a == b)
        regions[a].internal_trips += f;
      else
        flows[a * m + b] += f;
    }
  }

  std::vector<std::vector<int>> lines;
  for (const auto& line : city.initial_lines()) {
    std::vector<int> mapped;
    for (int s : line) {
      const int g = group[static_cast<std::size_t>(s)];
      if (std::find(mapped.begin(), mapped.end(), g) == mapped.end()) mapped.push_back(g);
    }
    lines.push_back(std::move(mapped));
  }
  return City(std::move(regions), std::move(flows), std::move(lines));
}

}  // namespace metroplan
