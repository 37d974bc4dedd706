#include "dnagen/gradcore/adam.hpp"

#include <cmath>

#include "dnagen/error.hpp"

namespace dnagen::ad {

AdamState make_adam_state(const AdamConfig& config, std::span<const Tensor> params) {
  AdamState s;
  s.config = config;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const auto& p : params) {
    s.m.emplace_back(p.shape());
    s.v.emplace_back(p.shape());
  }
  return s;
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
               bool maximize) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw DimensionError("adam_step: parameter/gradient/state counts differ");
  const AdamConfig& c = state.config;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double corr1 = 1.0 - std::pow(c.beta1, t);
  const double corr2 = 1.0 - std::pow(c.beta2, t);
  const double sign = maximize ? -1.0 : 1.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const Tensor& g = grads[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    if (p.shape() != g.shape() || p.shape() != m.shape())
      throw DimensionError("adam_step: shape mismatch for parameter " + std::to_string(i) +
                           ": " + to_string(p.shape()) + " vs " + to_string(g.shape()));
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = sign * g[j];
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
      const double mhat = m[j] / corr1;
      const double vhat = v[j] / corr2;
      p[j] -= c.step_size * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

}  // namespace dnagen::ad
