#pragma once

#include <vector>

#include "metroplan/nn/tape.hpp"

namespace metroplan::nn {

struct AdamConfig {
  double lr = 0.0004;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// First/second moments per parameter plus the step counter.
struct AdamState {
  long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  static AdamState zeros_like(const ParameterSet& params);
  bool operator==(const AdamState&) const = default;
};

// One bias-corrected Adam update. Moments are created on first use. Throws
// InvalidArgument when gradient or moment shapes do not match the
// parameters, NumericError if an updated parameter is not finite.
void adam_step(ParameterSet& params, const std::vector<Matrix>& grads, AdamState& state, const AdamConfig& config);

}  // namespace metroplan::nn
