#include "dvgo/adam.hpp"

#include <stdexcept>

namespace dvgo {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr_factor, std::span<const double> per_param_scale) {
  const std::size_t n = params.size();
  if (grads.size() != n) throw std::invalid_argument("adam_step: gradient shape mismatch");
  if (state.m.size() != n || state.v.size() != n)
    throw std::invalid_argument("adam_step: state shape mismatch");
  if (!per_param_scale.empty() && per_param_scale.size() != n)
    throw std::invalid_argument("adam_step: per-parameter scale shape mismatch");

  state.step += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const double lr = state.base_lr * lr_factor;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    double step_lr = lr;
    if (!per_param_scale.empty()) step_lr *= per_param_scale[i];
    params[i] -= step_lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

}  // namespace dvgo
