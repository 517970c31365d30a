#pragma once

#include <string>
#include <vector>

#include "dvgo/rgb.hpp"

namespace dvgo {

/// Row-major HWC image with values in [0,1]; 3 (RGB) or 4 (RGBA) channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<double> px;

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c), px(std::size_t(w) * h * c, 0.0) {}

  double& at(int x, int y, int c) { return px[(std::size_t(y) * width + x) * channels + c]; }
  double at(int x, int y, int c) const { return px[(std::size_t(y) * width + x) * channels + c]; }

  Rgb rgb(int x, int y) const { return {at(x, y, 0), at(x, y, 1), at(x, y, 2)}; }
  void set_rgb(int x, int y, Rgb v) {
    at(x, y, 0) = v[0];
    at(x, y, 1) = v[1];
    at(x, y, 2) = v[2];
  }
};

/// 8-bit PNG round trip. Reads gray/palette images as RGB; keeps alpha when
/// the file has one.
Image read_png(const std::string& path);
void write_png(const Image& img, const std::string& path);

/// 10*log10(1 / MSE) over the RGB channels, capped at 99.0 dB.
double psnr(const Image& a, const Image& b);

/// Mean local SSIM: 11x11 Gaussian window sigma=1.5, K1=0.01, K2=0.03,
/// dynamic range 1, averaged over the RGB channels. Needs min side >= 11.
double ssim(const Image& a, const Image& b);

double mean_abs_diff(const Image& a, const Image& b);

}  // namespace dvgo
