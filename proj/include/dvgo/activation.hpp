#pragma once

#include <cmath>
#include <stdexcept>

namespace dvgo {

/// Shift of the softplus density activation.
struct ActivationBias {
  double b = 0.0;
};

/// log(1 + exp(x + b)), overflow-safe: linear above +30, exp below -30.
inline double softplus_shifted(double raw, ActivationBias bias) {
  double t = raw + bias.b;
  if (t > 30.0) return t;
  if (t < -30.0) return std::exp(t);
  return std::log1p(std::exp(t));
}

/// d softplus_shifted / d raw, matching the forward's branch cutoffs.
inline double softplus_shifted_grad(double raw, ActivationBias bias) {
  double t = raw + bias.b;
  if (t > 30.0) return 1.0;
  if (t < -30.0) return std::exp(t);
  return 1.0 / (1.0 + std::exp(-t));
}

/// alpha = 1 - exp(-sigma * delta).
inline double alpha_from_sigma(double sigma, double delta) {
  return -std::expm1(-sigma * delta);
}

/// d alpha / d sigma.
inline double alpha_from_sigma_grad(double sigma, double delta) {
  return delta * std::exp(-sigma * delta);
}

/// Bias that makes a zero-initialized grid decay transmittance by exactly
/// (1 - alpha_init) per voxel-size distance: b = log((1-a)^(-1/s) - 1).
inline ActivationBias low_density_bias(double alpha_init, double voxel_size) {
  if (!(alpha_init > 0.0 && alpha_init < 1.0))
    throw std::invalid_argument("alpha_init must lie in (0,1)");
  if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel_size must be positive");
  // (1-a)^(-1/s) - 1 == expm1(-log1p(-a)/s), stable for tiny alpha_init
  return {std::log(std::expm1(-std::log1p(-alpha_init) / voxel_size))};
}

inline double sigmoid(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double sigmoid_grad_from_value(double s) { return s * (1.0 - s); }

}  // namespace dvgo
