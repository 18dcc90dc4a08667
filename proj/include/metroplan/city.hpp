#pragma once

#include <cstdint>
#include <vector>

namespace metroplan {

// One urban region, represented by its centroid. Coordinates are planar km.
struct Region {
  int id = 0;
  double x_km = 0.0;
  double y_km = 0.0;
  double population = 0.0;
  std::vector<double> poi;  // counts per POI category
  // Trips that became intra-region when smaller regions were merged into
  // this one. Zero for unmerged cities.
  double internal_trips = 0.0;

  bool operator==(const Region&) const = default;
};

// Immutable region set plus the k x k origin-destination matrix (trips/day).
// Optionally carries user-supplied initial metro lines as region-id lists.
class City {
 public:
  City() = default;
  // Throws ValidationError when any invariant is violated: ids not dense,
  // non-finite coordinates, negative counts, flows of the wrong size, a
  // nonzero diagonal, or negative / non-finite flows.
  City(std::vector<Region> regions, std::vector<double> flows,
       std::vector<std::vector<int>> initial_lines = {});

  std::size_t size() const { return regions_.size(); }
  const std::vector<Region>& regions() const { return regions_; }
  const Region& region(int i) const { return regions_[static_cast<std::size_t>(i)]; }
  std::size_t poi_categories() const { return regions_.empty() ? 0 : regions_.front().poi.size(); }

  double flow(int from, int to) const { return flows_[index(from, to)]; }
  // F_ij + F_ji; every consumer of the OD matrix goes through this.
  double symmetric_flow(int i, int j) const { return flow(i, j) + flow(j, i); }
  const std::vector<double>& flow_matrix() const { return flows_; }
  // Sum over unordered pairs of the symmetrized flow.
  double total_flow() const;
  double total_population() const;

  double distance(int i, int j) const;

  const std::vector<std::vector<int>>& initial_lines() const { return initial_lines_; }

  bool operator==(const City&) const = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * regions_.size() + static_cast<std::size_t>(j);
  }

  std::vector<Region> regions_;
  std::vector<double> flows_;
  std::vector<std::vector<int>> initial_lines_;
};

struct GenParams {
  int clusters = 3;                // population centres
  double gravity_exponent = 2.0;   // distance decay of the gravity model
  double side_km = 0.0;            // square side; 0 derives it from cell_km
  double cell_km = 2.0;            // jittered-grid cell size when side_km = 0
  double jitter = 0.8;             // fraction of a cell a centroid may move
  int poi_categories = 4;
  double peak_population = 20000.0;
  double base_population = 1000.0;
  double flow_scale = 1e-5;        // gravity constant c
};

// Seeded synthetic city: jittered-grid centroids, population from a mixture
// of radial Gaussians, gravity-model OD flows
//   F_ij = round(c * pop_i * pop_j / max(d_ij, 0.5)^gamma).
// Deterministic for fixed (k, seed, params). Throws InvalidArgument for k < 4.
City generate_city(int k, std::uint64_t seed, const GenParams& params = {});

// Area of each region's Voronoi cell clipped to the bounding square of all
// centroids. A site that coincides with a lower-id site gets area 0.
std::vector<double> voronoi_areas(const City& city);

struct MergeParams {
  double area_threshold = 2.5;  // km^2
  double dist_threshold = 1.5;  // km
};

// Merges regions whose Voronoi area is below area_threshold into their
// nearest surviving neighbour when that neighbour is closer than
// dist_threshold. Populations, POIs and flows are summed; flows that become
// intra-region are kept in Region::internal_trips. Ids are re-densified and
// initial lines remapped. Throws InvalidArgument for negative thresholds or
// when fewer than two regions would remain.
City merge_small_regions(const City& city, double area_threshold, double dist_threshold);
inline City merge_small_regions(const City& city, const MergeParams& p = {}) {
  return merge_small_regions(city, p.area_threshold, p.dist_threshold);
}

}  // namespace metroplan
