#include "dvgo/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace dvgo {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open image: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("failed decoding png: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_expand(png);
  png_set_strip_16(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int ch = static_cast<int>(png_get_channels(png, info));
  if (ch != 3 && ch != 4) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unsupported png channel count in " + path);
  }

  std::vector<unsigned char> bytes(std::size_t(w) * h * ch);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = bytes.data() + std::size_t(y) * w * ch;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(w, h, ch);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.px[i] = bytes[i] / 255.0;
  return img;
}

void write_png(const Image& img, const std::string& path) {
  if (img.channels != 3 && img.channels != 4)
    throw std::invalid_argument("write_png supports RGB or RGBA");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed encoding png: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<unsigned char> row(std::size_t(img.width) * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double v = std::clamp(img.at(x, y, c), 0.0, 1.0);
        row[std::size_t(x) * img.channels + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

static void require_same_size(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("image dimensions differ");
  if (a.channels < 3 || b.channels < 3) throw std::invalid_argument("images must be RGB(A)");
}

double psnr(const Image& a, const Image& b) {
  require_same_size(a, b);
  double mse = 0.0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      mse += sq_dist(a.rgb(x, y), b.rgb(x, y));
  mse /= 3.0 * a.width * a.height;
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) {
  require_same_size(a, b);
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  if (a.width < kWin || a.height < kWin)
    throw std::invalid_argument("ssim needs min side >= 11");

  double g[kWin];
  double gsum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    double d = i - (kWin - 1) / 2.0;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    gsum += g[i];
  }
  for (double& v : g) v /= gsum;

  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    double acc = 0.0;
    std::size_t n_win = 0;
    for (int y0 = 0; y0 + kWin <= a.height; ++y0)
      for (int x0 = 0; x0 + kWin <= a.width; ++x0) {
        double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
        for (int j = 0; j < kWin; ++j)
          for (int i = 0; i < kWin; ++i) {
            double w = g[i] * g[j];
            double va = a.at(x0 + i, y0 + j, c);
            double vb = b.at(x0 + i, y0 + j, c);
            mx += w * va;
            my += w * vb;
            mxx += w * va * va;
            myy += w * vb * vb;
            mxy += w * va * vb;
          }
        double sx = mxx - mx * mx;
        double sy = myy - my * my;
        double sxy = mxy - mx * my;
        acc += ((2 * mx * my + kC1) * (2 * sxy + kC2)) /
               ((mx * mx + my * my + kC1) * (sx + sy + kC2));
        ++n_win;
      }
    total += acc / static_cast<double>(n_win);
  }
  return total / 3.0;
}

double mean_abs_diff(const Image& a, const Image& b) {
  require_same_size(a, b);
  double acc = 0.0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      for (int c = 0; c < 3; ++c) acc += std::abs(a.at(x, y, c) - b.at(x, y, c));
  return acc / (3.0 * a.width * a.height);
}

}  // namespace dvgo
