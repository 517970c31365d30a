#include "dvgo/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dvgo/log.hpp"

namespace dvgo {

double photometric_loss(const std::vector<Rgb>& pred, const std::vector<Rgb>& target) {
  if (pred.empty() || pred.size() != target.size())
    throw std::invalid_argument("photometric_loss needs equally sized, nonempty batches");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += sq_dist(pred[i], target[i]);
  return acc / static_cast<double>(pred.size());
}

double per_point_rgb_loss(const std::vector<double>& weights, const std::vector<Rgb>& colors,
                          Rgb target) {
  if (weights.size() != colors.size())
    throw std::invalid_argument("per_point_rgb_loss: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    num += weights[i] * sq_dist(colors[i], target);
    den += weights[i];
  }
  return num / std::max(den, kPtRgbNormEps);
}

void per_point_rgb_loss_backward(const std::vector<double>& weights,
                                 const std::vector<Rgb>& colors, Rgb target, double upstream,
                                 std::vector<Rgb>& d_colors) {
  double den = 0.0;
  for (double w : weights) den += w;
  den = std::max(den, kPtRgbNormEps);
  d_colors.assign(colors.size(), Rgb{0, 0, 0});
  for (std::size_t i = 0; i < colors.size(); ++i) {
    double s = upstream * 2.0 * weights[i] / den;
    for (int c = 0; c < 3; ++c) d_colors[i][c] = s * (colors[i][c] - target[c]);
  }
}

static double clamp_p(double p) { return std::clamp(p, 1e-6, 1.0 - 1e-6); }

double background_entropy_loss(double bg_transmittance) {
  double p = clamp_p(bg_transmittance);
  return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
}

double background_entropy_loss_grad(double bg_transmittance) {
  if (bg_transmittance < 1e-6 || bg_transmittance > 1.0 - 1e-6) return 0.0;  // clamped flat
  double p = bg_transmittance;
  return std::log((1.0 - p) / p);
}

std::vector<double> view_count_scale(const DenseGrid& grid, const std::vector<Camera>& cameras) {
  if (cameras.empty()) throw std::invalid_argument("view_count_scale needs cameras");
  std::vector<double> counts(grid.points(), 0.0);
  std::size_t j = 0;
  for (int ix = 0; ix < grid.dims()[0]; ++ix)
    for (int iy = 0; iy < grid.dims()[1]; ++iy)
      for (int iz = 0; iz < grid.dims()[2]; ++iz, ++j) {
        Vec3 p = grid.point_position(ix, iy, iz);
        int n = 0;
        for (const Camera& cam : cameras)
          if (frustum_contains(cam, p)) ++n;
        counts[j] = n;
      }
  double n_max = *std::max_element(counts.begin(), counts.end());
  if (n_max == 0.0) {
    DVGO_LOG_INFO("view_count_scale: no grid point visible to any camera, keeping scale 1");
    std::fill(counts.begin(), counts.end(), 1.0);
    return counts;
  }
  for (double& c : counts) c /= n_max;
  return counts;
}

}  // namespace dvgo
