#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dnagen/gradcore/tensor.hpp"

namespace dnagen::ad {

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t t = 0;
};

AdamState make_adam_state(const AdamConfig& config, std::span<const Tensor> params);

// One bias-corrected Adam update in place. With maximize set the update
// ascends the gradient instead of descending it.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
               bool maximize = false);

}  // namespace dnagen::ad
