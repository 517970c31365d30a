#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace dvgo {

/// Exponential decay factor 0.1^(t / period); hits exactly 0.1 at t = period.
inline double lr_decay_factor(std::int64_t step, double period = 20000.0) {
  return std::pow(0.1, static_cast<double>(step) / period);
}

/// Adam state for one parameter tensor.
struct AdamState {
  double base_lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamState(double lr = 0.1, std::size_t n = 0) : base_lr(lr), m(n, 0.0), v(n, 0.0) {}

  void resize(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    step = 0;
  }
};

/// One bias-corrected Adam update. Effective learning rate per parameter is
/// base_lr * lr_factor * per_param_scale[i]; the scale span is optional and
/// must match params when present.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr_factor, std::span<const double> per_param_scale = {});

}  // namespace dvgo
