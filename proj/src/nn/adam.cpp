#include "metroplan/nn/adam.hpp"

#include <cmath>

#include "metroplan/error.hpp"

namespace metroplan::nn {

AdamState AdamState::zeros_like(const ParameterSet& params) {
  AdamState s;
  for (const Parameter& p : params) {
    s.m.emplace_back(p.value.rows(), p.value.cols(), 0.0);
    s.v.emplace_back(p.value.rows(), p.value.cols(), 0.0);
  }
  return s;
}

void adam_step(ParameterSet& params, const std::vector<Matrix>& grads, AdamState& state, const AdamConfig& config) {
  if (grads.size() != params.size())
    throw InvalidArgument("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                          std::to_string(params.size()) + " parameters");
  if (state.m.empty()) state = AdamState::zeros_like(params);
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw InvalidArgument("adam_step: optimizer state does not match the parameter set");

  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& w = params[p].value;
    const Matrix& g = grads[p];
    Matrix& m = state.m[p];
    Matrix& v = state.v[p];
    if (!w.same_shape(g) || !w.same_shape(m) || !w.same_shape(v))
      throw InvalidArgument("adam_step: shape mismatch for " + params[p].name + ": parameter " + w.shape() +
                            ", gradient " + g.shape());
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] + config.weight_decay * w[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
    }
    if (!w.all_finite()) throw NumericError("adam_step: parameter " + params[p].name + " became non-finite");
  }
}

}  // namespace metroplan::nn
