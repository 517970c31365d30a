#pragma once

#include <vector>

#include "dvgo/camera.hpp"
#include "dvgo/grid.hpp"
#include "dvgo/rgb.hpp"

namespace dvgo {

struct LossWeights {
  double photo = 1.0;
  double pt_rgb = 0.1;
  double bg = 0.01;

  static LossWeights coarse_defaults() { return {1.0, 1e-1, 1e-2}; }
  static LossWeights fine_defaults() { return {1.0, 1e-2, 1e-3}; }
};

/// Mean over rays of the squared L2 distance between RGB triples.
double photometric_loss(const std::vector<Rgb>& pred, const std::vector<Rgb>& target);

constexpr double kPtRgbNormEps = 1e-9;

/// Weighted color MSE normalized by the total weight:
/// sum_i w_i |c_i - target|^2 / max(sum_i w_i, eps). Weights act as fixed
/// coefficients here; the gradient flows to the colors only.
double per_point_rgb_loss(const std::vector<double>& weights, const std::vector<Rgb>& colors,
                          Rgb target);

/// dL/dc_i for per_point_rgb_loss, appended as 2 w_i (c_i - target) / max(W, eps).
void per_point_rgb_loss_backward(const std::vector<double>& weights,
                                 const std::vector<Rgb>& colors, Rgb target, double upstream,
                                 std::vector<Rgb>& d_colors);

/// Binary entropy of the background probability, clamped to [1e-6, 1-1e-6].
double background_entropy_loss(double bg_transmittance);
double background_entropy_loss_grad(double bg_transmittance);

/// Per-grid-point learning-rate scale n_j / n_max, where n_j counts the
/// cameras whose frustum contains point j. All ones (plus a warning) when
/// nothing is visible.
std::vector<double> view_count_scale(const DenseGrid& grid, const std::vector<Camera>& cameras);

}  // namespace dvgo
