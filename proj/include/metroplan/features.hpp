#pragma once

#include <string>
#include <vector>

#include "metroplan/city.hpp"
#include "metroplan/graph.hpp"
#include "metroplan/metro.hpp"

namespace metroplan {

// Per-region input attributes, one row per region, columns
//   FD1  total symmetrized OD flow of the region
//   FD2  flow exchanged with spatial neighbours
//   FD3  flow exchanged with station regions
//   FA1  population
//   FA2  POI counts, one column per category
//   FA4  spatial degree
//   FA5  flow degree
//   FA6  distance to the nearest station (0 for an empty network)
// FD3 and FA6 depend on the metro state; everything else is static.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
  std::vector<std::string> names;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  std::size_t column(const std::string& name) const;
};

std::size_t feature_dim(std::size_t poi_categories);

// Unnormalized attribute values.
FeatureMatrix raw_node_features(const City& city, const HeteroGraph& graph, const MetroState& metro);

// Min-max normalizes every column of raw values to [0, 1]; constant columns
// become 0.
void normalize_columns(FeatureMatrix& features);

// Normalized features, the encoder's input.
FeatureMatrix node_features(const City& city, const HeteroGraph& graph, const MetroState& metro);

}  // namespace metroplan
