#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "brute_force.hpp"
#include "metroplan/error.hpp"
#include "metroplan/metro.hpp"
#include "support.hpp"

using namespace metroplan;
using testing::city_from_points;
using testing::network;

TEST_CASE("path distance along a straight line") {
  const City c = city_from_points({{0, 0}, {1, 0}, {2, 0}});
  const StationDistances d = path_distances(network({{0, 1, 2}}), c);
  CHECK(d.between(0, 2) == 2.0);
  CHECK(d.between(2, 0) == 2.0);
  CHECK(d.between(1, 1) == 0.0);
}

TEST_CASE("disjoint lines are unreachable from each other") {
  const City c = city_from_points({{0, 0}, {1, 0}, {5, 0}, {6, 0}});
  const StationDistances d = path_distances(network({{0, 1}, {2, 3}}), c);
  CHECK(d.between(0, 1) == 1.0);
  CHECK(std::isinf(d.between(0, 2)));
  CHECK(std::isinf(d.between(1, 3)));
}

TEST_CASE("L-shaped line") {
  const City c = city_from_points({{0, 0}, {3, 0}, {3, 4}}, {{0, 2, 14}});
  const MetroState s = network({{0, 1, 2}});
  CHECK(path_distances(s, c).between(0, 2) == 7.0);
  CHECK(satisfied_od(s, c) == doctest::Approx(10.0).epsilon(1e-15));
}

TEST_CASE("two-station line with flow 10") {
  const City c = city_from_points({{0, 0}, {2, 0}, {9, 9}}, {{0, 1, 10}, {1, 2, 99}});
  CHECK(satisfied_od(network({{0, 1}}), c) == 10.0);
}

TEST_CASE("single-station and empty networks score zero") {
  const City c = city_from_points({{0, 0}, {2, 0}}, {{0, 1, 10}});
  CHECK(satisfied_od(network({{0}}), c) == 0.0);
  CHECK(satisfied_od(MetroState{}, c) == 0.0);
}

TEST_CASE("interchange joins lines") {
  // Line 0: 0-1-2 along x; line 1: 1-3 up from the middle.
  const City c = city_from_points({{0, 0}, {1, 0}, {2, 0}, {1, 1}}, {{0, 3, 6}});
  const MetroState s = network({{0, 1, 2}, {1, 3}});
  CHECK(s.interchanges() == std::vector<int>{1});
  CHECK(path_distances(s, c).between(0, 3) == 2.0);
  CHECK(satisfied_od(s, c) == doctest::Approx(6.0 * std::sqrt(2.0) / 2.0));
}

TEST_CASE("coincident stations are excluded") {
  const City c = city_from_points({{0, 0}, {0, 0}, {1, 0}}, {{0, 1, 50}, {0, 2, 3}});
  CHECK(satisfied_od(network({{0, 2, 1}}), c) == doctest::Approx(3.0));
}

TEST_CASE("collinear ordered line equals the plain flow sum") {
  const City c = city_from_points({{0, 0}, {1, 0}, {2.5, 0}, {4, 0}},
                                  {{0, 1, 3}, {0, 2, 5}, {0, 3, 7}, {1, 2, 11}, {1, 3, 13}, {2, 3, 17}});
  CHECK(satisfied_od(network({{0, 1, 2, 3}}), c) == doctest::Approx(56.0).epsilon(1e-14));
}

TEST_CASE("adjacent-pairs mode counts only segments") {
  const City c = city_from_points({{0, 0}, {3, 0}, {3, 4}}, {{0, 2, 14}, {0, 1, 2}});
  const MetroState s = network({{0, 1, 2}});
  CHECK(satisfied_od(s, c, OdPairs::Adjacent) == 2.0);
  CHECK(satisfied_od(s, c, OdPairs::Connected) == doctest::Approx(12.0));
}

TEST_CASE("satisfied OD matches the brute-force evaluator on random networks") {
  const City c = generate_city(20, 3);
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const auto lines = testing::random_lines(rng, 20);
    const double expect = testing::brute_force_cod(lines, c);
    const double got = satisfied_od(testing::to_state(lines), c);
    CHECK(std::abs(got - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
  }
}

TEST_CASE("detour factor lies in (0, 1]") {
  const City c = generate_city(20, 6);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const MetroState s = testing::to_state(testing::random_lines(rng, 20));
    const StationDistances d = path_distances(s, c);
    for (std::size_t a = 0; a < d.size(); ++a)
      for (std::size_t b = a + 1; b < d.size(); ++b) {
        const double e = c.distance(d.regions[a], d.regions[b]);
        if (!std::isfinite(d.at(a, b)) || e == 0.0) continue;
        CHECK(e / d.at(a, b) > 0.0);
        CHECK(e / d.at(a, b) <= 1.0 + 1e-12);
      }
  }
}

TEST_CASE("adding stations never lowers satisfied OD") {
  const City c = generate_city(20, 8);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    auto lines = testing::random_lines(rng, 20);
    const double before = satisfied_od(testing::to_state(lines), c);
    for (int v = 0; v < 20; ++v) {
      if (std::find(lines[0].begin(), lines[0].end(), v) != lines[0].end()) continue;
      lines[0].push_back(v);
      break;
    }
    CHECK(satisfied_od(testing::to_state(lines), c) >= before);
  }
}

TEST_CASE("inequity examples") {
  const City two = city_from_points({{0, 0}, {2, 0}});
  CHECK(inequity(network({{0}}), two) == 1.0);
  const City c = generate_city(12, 1);
  CHECK(inequity(network({{0, 1, 2, 3, 4, 5}, {6, 7, 8, 9, 10, 11}}), c) == 0.0);
  CHECK_THROWS_AS(inequity(MetroState{}, c), InvalidState);
}

TEST_CASE("inequity matches a direct variance on a k=20 city") {
  const City c = generate_city(20, 0);
  const MetroState s = network({{2, 9}, {15}});
  const double expect = testing::brute_force_inequity({2, 9, 15}, c);
  CHECK(inequity(s, c) == doctest::Approx(expect).epsilon(1e-13));
  CHECK(inequity(s, c) >= 0.0);
}

TEST_CASE("extension costs") {
  const CostModel costs;
  const City c = city_from_points({{0, 0}, {1, 0}, {2.2, 0}, {1, 0}, {1, 1}, {2, 0}});
  // Line 0 ends at 1; line 1 holds region 5 one km from that terminal.
  const MetroState s = network({{0, 1}, {4, 5}});
  CHECK(extension_cost(s, 0, LineEnd::Back, 2, c, costs) == doctest::Approx(900.0));
  CHECK(extension_cost(s, 0, LineEnd::Back, 3, c, costs) == 300.0);
  CHECK(extension_cost(s, 0, LineEnd::Back, 5, c, costs) == doctest::Approx(800.0));
  CHECK(extension_cost(s, 0, 2, c, costs) == doctest::Approx(900.0));
  CHECK_THROWS_AS(extension_cost(s, 7, 2, c, costs), InvalidArgument);
}

TEST_CASE("new line costs") {
  const City c = city_from_points({{0, 0}, {1, 0}, {4, 0}});
  const MetroState s = network({{0, 1}});
  CostModel costs;
  CHECK(new_line_cost(s, 2, c, costs) == 300.0);
  CHECK(new_line_cost(s, 1, c, costs) == 300.0);
  CHECK(costs.upgrade_cost() == 300.0);
  costs.station_cost = 450.0;
  CHECK(new_line_cost(s, 2, c, costs) == 450.0);
}

TEST_CASE("cost model validation") {
  CostModel costs;
  CHECK_NOTHROW(costs.validate());
  costs.per_km_cost = 0.0;
  CHECK_THROWS_AS(costs.validate(), ConfigError);
  costs = CostModel{};
  costs.interchange_cost = 200.0;
  CHECK_THROWS_AS(costs.validate(), ConfigError);
}

TEST_CASE("terminals and subterminals") {
  const MetroState s = network({{0, 1, 2, 3}, {5}});
  CHECK(s.terminals() == std::vector<int>{0, 3, 5});
  CHECK(s.subterminals() == std::vector<int>{1, 2});
  CHECK(s.stations() == std::vector<int>{0, 1, 2, 3, 5});
  CHECK(s.lines_at(2) == 1);
  CHECK_THROWS_AS(s.line(9), InvalidArgument);
}
