#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "metroplan/city.hpp"

namespace metroplan {

// Region multi-graph with two undirected edge types:
//   spatial: 0 < EucDis(i, j) <= t1
//   flow:    F_ij + F_ji >= t2
// Edges are stored once per unordered pair with first < second.
struct HeteroGraph {
  using Edge = std::pair<int, int>;

  std::size_t num_nodes = 0;
  std::vector<Edge> spatial_edges;
  std::vector<Edge> flow_edges;
  double t1 = 0.0;
  double t2 = 0.0;

  bool has_spatial_edge(int i, int j) const;
  bool has_flow_edge(int i, int j) const;
  std::vector<int> spatial_degree() const;
  std::vector<int> flow_degree() const;
  // Neighbour lists, sorted ascending.
  std::vector<std::vector<int>> spatial_neighbors() const;
  std::vector<std::vector<int>> flow_neighbors() const;
};

inline constexpr double kDefaultSpatialThresholdKm = 2.0;
inline constexpr double kDefaultFlowPercentile = 0.9;

// Nearest-rank percentile of the nonzero symmetrized flows over unordered
// pairs; 0 when the city has no flow.
double flow_percentile(const City& city, double q);

// Throws InvalidArgument for t1 <= 0 or t2 < 0.
HeteroGraph build_graph(const City& city, double t1, double t2);

// t1 defaults to 2 km, t2 to the 90th percentile of nonzero symmetrized flows.
HeteroGraph build_graph(const City& city, std::optional<double> t1 = std::nullopt,
                        std::optional<double> t2 = std::nullopt);

}  // namespace metroplan
