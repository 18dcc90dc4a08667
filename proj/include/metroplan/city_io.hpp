#pragma once

#include <filesystem>
#include <string>

#include "metroplan/city.hpp"

namespace metroplan {

// City document, format 1:
//   {
//     "format": 1,
//     "regions": [{"id", "x_km", "y_km", "population", "poi": [...],
//                  "internal_trips" (optional)}, ...],
//     "flows": [[i, j, trips], ...],        // sparse, directed
//     "initial_lines": [[id, ...], ...]     // optional
//   }
// Distances are km, flows trips/day.
std::string city_to_json(const City& city);

// Throws ParseError (naming the line or field) for malformed documents,
// duplicate region ids or duplicate flow entries, and ValidationError for
// documents that parse but violate City invariants (e.g. negative trips).
City city_from_json(const std::string& text);

void save_city(const City& city, const std::filesystem::path& path);
City load_city(const std::filesystem::path& path);

}  // namespace metroplan
