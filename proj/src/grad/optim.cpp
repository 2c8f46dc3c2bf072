#include "grad/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace tokforge::grad {

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr) {
  if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be positive");
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: one gradient per parameter required");
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0);
      state.v[i].assign(params[i].size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state sized for a different parameter set");
  }

  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape != grads[i].shape) {
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    }
    if (state.m[i].size() != params[i].size()) {
      throw std::invalid_argument("adam_step: moment shape mismatch");
    }
    auto& p = params[i].values();
    const auto& g = grads[i].values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace tokforge::grad
