#pragma once

#include <cstdint>

#include "dvgo/compositor.hpp"
#include "dvgo/image.hpp"

namespace dvgo {

/// Binary test images for the 2D grid-fitting experiment.
Image make_halfplane_target(int size, double angle_deg);
Image make_disk_target(int size, double radius_frac = 0.35);
Image make_checker_target(int size, int cells = 4);

struct Toy2DOptions {
  int iters = 3000;
  double lr = 3.0;  // sharp boundaries need grid values in the hundreds
  double delta_render = 0.5;  // alpha step of the activation orderings
  std::uint64_t seed = 0;
};

struct Toy2DResult {
  Image fitted;  // RGB, all channels equal
  double mse = 0;
  double psnr = 0;
};

/// Fits a low-resolution 2D grid to a binary target by Adam on the per-pixel
/// MSE, where each predicted pixel is the mode-activated bilinear
/// interpolation at the pixel center. stride is the pixels-per-cell ratio
/// (grid dims rounded up, min 2).
Toy2DResult toy_image_fit(const Image& target, double stride, ActivationMode mode,
                          const Toy2DOptions& opts = {});

}  // namespace dvgo
