#include "metroplan/features.hpp"

#include <algorithm>

#include "metroplan/error.hpp"

namespace metroplan {

std::size_t FeatureMatrix::column(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument("no feature column named " + name);
  return static_cast<std::size_t>(it - names.begin());
}

std::size_t feature_dim(std::size_t poi_categories) { return 7 + poi_categories; }

FeatureMatrix raw_node_features(const City& city, const HeteroGraph& graph, const MetroState& metro) {
  const std::size_t k = city.size();
  const std::size_t poi = city.poi_categories();
  FeatureMatrix f;
  f.rows = k;
  f.cols = feature_dim(poi);
  f.values.assign(f.rows * f.cols, 0.0);
  f.names = {"FD1", "FD2", "FD3", "FA1"};
  for (std::size_t c = 0; c < poi; ++c) f.names.push_back("FA2_" + std::to_string(c));
  f.names.insert(f.names.end(), {"FA4", "FA5", "FA6"});

  const auto spatial = graph.spatial_neighbors();
  const auto spatial_deg = graph.spatial_degree();
  const auto flow_deg = graph.flow_degree();
  const std::vector<int> stations = metro.stations();
  std::vector<double> to_network(k, 0.0);
  if (!stations.empty()) to_network = distance_to_network(metro, city);

  for (std::size_t i = 0; i < k; ++i) {
    const int ii = static_cast<int>(i);
    double fd1 = 0.0;
    for (std::size_t j = 0; j < k; ++j) fd1 += city.symmetric_flow(ii, static_cast<int>(j));
    double fd2 = 0.0;
    for (int j : spatial[i]) fd2 += city.symmetric_flow(ii, j);
    double fd3 = 0.0;
    for (int s : stations) fd3 += city.symmetric_flow(ii, s);

    std::size_t c = 0;
    f.at(i, c++) = fd1;
    f.at(i, c++) = fd2;
    f.at(i, c++) = fd3;
    f.at(i, c++) = city.region(ii).population;
    for (double count : city.region(ii).poi) f.at(i, c++) = count;
    f.at(i, c++) = spatial_deg[i];
    f.at(i, c++) = flow_deg[i];
    f.at(i, c++) = to_network[i];
  }
  return f;
}

void normalize_columns(FeatureMatrix& f) {
  for (std::size_t c = 0; c < f.cols; ++c) {
    double lo = 0.0, hi = 0.0;
    for (std::size_t r = 0; r < f.rows; ++r) {
      const double v = f.at(r, c);
      if (r == 0 || v < lo) lo = v;
      if (r == 0 || v > hi) hi = v;
    }
    for (std::size_t r = 0; r < f.rows; ++r) f.at(r, c) = hi > lo ? (f.at(r, c) - lo) / (hi - lo) : 0.0;
  }
}

FeatureMatrix node_features(const City& city, const HeteroGraph& graph, const MetroState& metro) {
  FeatureMatrix f = raw_node_features(city, graph, metro);
  normalize_columns(f);
  return f;
}

}  // namespace metroplan
