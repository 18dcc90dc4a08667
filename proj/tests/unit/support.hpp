#pragma once

#include <array>
#include <cmath>
#include <initializer_list>
#include <tuple>
#include <vector>

#include "metroplan/city.hpp"
#include "metroplan/metro.hpp"

namespace testing {

using metroplan::City;
using metroplan::MetroLine;
using metroplan::MetroState;
using metroplan::Region;

// Hand-built city: one (x, y) per region, population 1000, one POI
// category, and the listed symmetric flows (each pair split evenly).
inline City city_from_points(std::initializer_list<std::array<double, 2>> points,
                             std::initializer_list<std::tuple<int, int, double>> flows = {},
                             std::vector<std::vector<int>> initial_lines = {}) {
  std::vector<Region> regions;
  for (const auto& p : points) {
    Region r;
    r.id = static_cast<int>(regions.size());
    r.x_km = p[0];
    r.y_km = p[1];
    r.population = 1000.0;
    r.poi = {1.0};
    regions.push_back(r);
  }
  const std::size_t k = regions.size();
  std::vector<double> f(k * k, 0.0);
  for (const auto& [i, j, v] : flows) {
    f[static_cast<std::size_t>(i) * k + static_cast<std::size_t>(j)] += v / 2;
    f[static_cast<std::size_t>(j) * k + static_cast<std::size_t>(i)] += v / 2;
  }
  return City(std::move(regions), std::move(f), std::move(initial_lines));
}

inline MetroState network(std::initializer_list<std::vector<int>> lines, double budget = 0.0, int quota = 0) {
  MetroState s;
  int id = 0;
  for (const auto& l : lines) s.lines.push_back(MetroLine{id++, l});
  s.budget_remaining = budget;
  s.new_lines_remaining = quota;
  return s;
}

inline double euclid(const City& c, int i, int j) {
  return std::hypot(c.region(i).x_km - c.region(j).x_km, c.region(i).y_km - c.region(j).y_km);
}

}  // namespace testing
