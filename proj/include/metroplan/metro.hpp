#pragma once

#include <limits>
#include <string>
#include <vector>

#include "metroplan/city.hpp"

namespace metroplan {

// Ordered station list of one line; stations are region ids.
struct MetroLine {
  int line_id = 0;
  std::vector<int> stations;

  int front() const { return stations.front(); }
  int back() const { return stations.back(); }
  bool contains(int region) const;
  bool operator==(const MetroLine&) const = default;
};

// Which end of a line an extension attaches to.
enum class LineEnd { Front = 0, Back = 1 };

struct MetroState {
  std::vector<MetroLine> lines;
  double budget_remaining = 0.0;  // b_t, million RMB
  int new_lines_remaining = 0;    // l_t

  // Station set V: sorted, unique region ids.
  std::vector<int> stations() const;
  // Regions served by two or more lines, sorted.
  std::vector<int> interchanges() const;
  bool is_station(int region) const;
  int lines_at(int region) const;
  // Terminal stations (both ends of every line) and the stations adjacent to
  // them, each sorted and unique.
  std::vector<int> terminals() const;
  std::vector<int> subterminals() const;
  // Throws InvalidArgument when no line carries this id.
  const MetroLine& line(int line_id) const;
  MetroLine& line(int line_id);

  bool operator==(const MetroState&) const = default;
};

struct CostModel {
  double station_cost = 300.0;      // million RMB per normal station
  double interchange_cost = 600.0;  // million RMB per interchange station
  double per_km_cost = 500.0;       // million RMB per km of track

  // Price of turning an existing station into an interchange.
  double upgrade_cost() const { return interchange_cost - station_cost; }
  // Throws ConfigError unless all costs are positive and an interchange
  // costs at least as much as a normal station.
  void validate() const;
};

// Station pairs counted by the objective: every pair joined by some path
// through the network, or only pairs joined by a single segment.
enum class OdPairs { Connected, Adjacent };
std::string to_string(OdPairs mode);
OdPairs od_pairs_from_string(const std::string& name);

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

// All-pairs shortest in-network distances between station regions. Edges are
// consecutive stations of a line weighted by their Euclidean distance; lines
// meet wherever they share a region.
struct StationDistances {
  std::vector<int> regions;   // sorted station regions
  std::vector<double> table;  // regions.size()^2, kUnreachable if disconnected

  std::size_t size() const { return regions.size(); }
  double at(std::size_t a, std::size_t b) const { return table[a * regions.size() + b]; }
  // By region id; kUnreachable when either region is not a station.
  double between(int region_a, int region_b) const;
};

StationDistances path_distances(const MetroState& metro, const City& city);

// Satisfied OD flow: sum over station pairs (i, j) with finite path distance
// and nonzero Euclidean distance of EucDis/PathDis * (F_ij + F_ji).
double satisfied_od(const MetroState& metro, const City& city, OdPairs mode = OdPairs::Connected);

// Euclidean distance from every region to its nearest station.
std::vector<double> distance_to_network(const MetroState& metro, const City& city);

// Population variance of region-to-nearest-station distances (km^2).
// Throws InvalidState when the network has no stations.
double inequity(const MetroState& metro, const City& city);

// Station part of a cost: a normal station, or the interchange upgrade when
// the region already hosts a station.
double station_part_cost(const MetroState& metro, int node, const CostModel& costs);

// Cost of attaching node to the given end of a line.
double extension_cost(const MetroState& metro, int line_id, LineEnd end, int node, const City& city,
                      const CostModel& costs);
// Cheapest over both ends of the line. Throws InvalidArgument for an unknown
// line id.
double extension_cost(const MetroState& metro, int line_id, int node, const City& city, const CostModel& costs);

// First station of a new line: station cost only.
double new_line_cost(const MetroState& metro, int node, const City& city, const CostModel& costs);

}  // namespace metroplan
