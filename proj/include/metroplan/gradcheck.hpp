#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "metroplan/nn/tape.hpp"

namespace metroplan {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;   // flat index inside worst_parameter
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;       // scalars compared
  std::vector<std::pair<std::string, double>> per_parameter;  // max error per parameter
};

// Relative error used throughout: |a - n| / max(|a|, |n|, 1e-6).
double gradient_rel_error(double analytic, double numeric);

// Central differences (h) of loss at every scalar of params, compared with
// the analytic gradients (one matrix per parameter, in set order).
GradCheckReport check_gradients(const std::function<double(const nn::ParameterSet&)>& loss,
                                const nn::ParameterSet& params, const std::vector<nn::Matrix>& analytic,
                                double h = 1e-5);

// Full-agent check: a seeded 10-region city, one sampled episode, and the
// PPO loss (clipped surrogate, value and entropy terms) of that batch under
// freshly initialized parameters.
GradCheckReport agent_gradient_check(std::uint64_t seed, double h = 1e-5);

}  // namespace metroplan
