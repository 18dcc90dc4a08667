#pragma once

#include <filesystem>
#include <string>

#include "metroplan/nn/adam.hpp"
#include "metroplan/nn/tape.hpp"

namespace metroplan::nn {

// Parameter checkpoint, format 1:
//   {
//     "format": 1,
//     "kind": "metroplan.checkpoint",
//     "metadata": {...},                         // caller-defined object
//     "parameters": [{"name", "shape": [r, c], "data": [...]}, ...],
//     "adam": {"step", "m": [[...], ...], "v": [[...], ...]}   // optional
//   }
// Doubles are written with round-trip precision, so save/load is exact.
struct Checkpoint {
  ParameterSet parameters;
  AdamState adam;           // empty moments when no optimizer state is stored
  std::string metadata = "{}";  // JSON object text
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
// Throws ParseError naming the offending field.
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace metroplan::nn
