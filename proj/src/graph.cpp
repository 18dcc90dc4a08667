#include "metroplan/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metroplan/error.hpp"

namespace metroplan {

namespace {

bool contains(const std::vector<HeteroGraph::Edge>& edges, int i, int j) {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges.begin(), edges.end(), HeteroGraph::Edge{i, j});
}

std::vector<int> degree(const std::vector<HeteroGraph::Edge>& edges, std::size_t n) {
  std::vector<int> deg(n, 0);
  for (const auto& [a, b] : edges) {
    ++deg[static_cast<std::size_t>(a)];
    ++deg[static_cast<std::size_t>(b)];
  }
  return deg;
}

std::vector<std::vector<int>> neighbors(const std::vector<HeteroGraph::Edge>& edges, std::size_t n) {
  std::vector<std::vector<int>> adj(n);
  for (const auto& [a, b] : edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

}  // namespace

bool HeteroGraph::has_spatial_edge(int i, int j) const { return contains(spatial_edges, i, j); }
bool HeteroGraph::has_flow_edge(int i, int j) const { return contains(flow_edges, i, j); }
std::vector<int> HeteroGraph::spatial_degree() const { return degree(spatial_edges, num_nodes); }
std::vector<int> HeteroGraph::flow_degree() const { return degree(flow_edges, num_nodes); }
std::vector<std::vector<int>> HeteroGraph::spatial_neighbors() const { return neighbors(spatial_edges, num_nodes); }
std::vector<std::vector<int>> HeteroGraph::flow_neighbors() const { return neighbors(flow_edges, num_nodes); }

double flow_percentile(const City& city, double q) {
  std::vector<double> values;
  const int k = static_cast<int>(city.size());
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      if (const double f = city.symmetric_flow(i, j); f > 0.0) values.push_back(f);
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

HeteroGraph build_graph(const City& city, double t1, double t2) {
  if (!(t1 > 0.0)) throw InvalidArgument("build_graph: t1 must be > 0, got " + std::to_string(t1));
  if (!(t2 >= 0.0)) throw InvalidArgument("build_graph: t2 must be >= 0, got " + std::to_string(t2));
  HeteroGraph g;
  g.num_nodes = city.size();
  g.t1 = t1;
  g.t2 = t2;
  const int k = static_cast<int>(city.size());
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const double d = city.distance(i, j);
      if (d > 0.0 && d <= t1) g.spatial_edges.emplace_back(i, j);
      if (city.symmetric_flow(i, j) >= t2) g.flow_edges.emplace_back(i, j);
    }
  }
  return g;
}

HeteroGraph build_graph(const City& city, std::optional<double> t1, std::optional<double> t2) {
  return build_graph(city, t1.value_or(kDefaultSpatialThresholdKm),
                     t2.has_value() ? *t2 : flow_percentile(city, kDefaultFlowPercentile));
}

}  // namespace metroplan
