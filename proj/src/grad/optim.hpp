#pragma once

#include <vector>

#include "grad/tensor.hpp"

namespace tokforge::grad {

// Bias-corrected adaptive-moment optimizer state. Moments are stored in the
// caller's parameter order; shapes must stay consistent across steps.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One update of every parameter in place. grads[i] must match params[i]'s
// shape. Moments are allocated on first use.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr);

}  // namespace tokforge::grad
