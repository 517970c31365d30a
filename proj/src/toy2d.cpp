#include "dvgo/toy2d.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "dvgo/adam.hpp"
#include "dvgo/rng.hpp"

namespace dvgo {

namespace {

Image binary_image(int size, const std::function<bool(double, double)>& inside) {
  Image img(size, size, 3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double v = inside((x + 0.5) / size, (y + 0.5) / size) ? 1.0 : 0.0;
      img.set_rgb(x, y, {v, v, v});
    }
  return img;
}

// Small 2D lattice over [0,W]x[0,H] with bilinear sampling; kept local to the
// image-fitting experiment.
struct Grid2D {
  int nx = 0, ny = 0;
  double w = 0, h = 0;
  std::vector<double> v;

  double& at(int ix, int iy) { return v[static_cast<std::size_t>(iy) * nx + ix]; }
  double at(int ix, int iy) const { return v[static_cast<std::size_t>(iy) * nx + ix]; }

  struct Stencil {
    std::size_t idx[4];
    double wt[4];
  };

  Stencil stencil(double x, double y) const {
    double gx = std::clamp(x / w * (nx - 1), 0.0, double(nx - 1));
    double gy = std::clamp(y / h * (ny - 1), 0.0, double(ny - 1));
    int ix = std::min(static_cast<int>(gx), nx - 2);
    int iy = std::min(static_cast<int>(gy), ny - 2);
    double fx = gx - ix, fy = gy - iy;
    std::size_t base = static_cast<std::size_t>(iy) * nx + ix;
    return {{base, base + 1, base + nx, base + nx + 1},
            {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy}};
  }
};

}  // namespace

Image make_halfplane_target(int size, double angle_deg) {
  double rad = angle_deg * M_PI / 180.0;
  double nx = std::cos(rad), ny = std::sin(rad);
  // offset slightly off-center so the boundary never aligns with cell edges
  double off = 0.5037 * (nx + ny);
  return binary_image(size, [=](double x, double y) { return nx * x + ny * y > off; });
}

Image make_disk_target(int size, double radius_frac) {
  double r2 = radius_frac * radius_frac;
  return binary_image(size, [=](double x, double y) {
    double dx = x - 0.5, dy = y - 0.5;
    return dx * dx + dy * dy < r2;
  });
}

Image make_checker_target(int size, int cells) {
  return binary_image(size, [=](double x, double y) {
    int cx = std::min(static_cast<int>(x * cells), cells - 1);
    int cy = std::min(static_cast<int>(y * cells), cells - 1);
    return (cx + cy) % 2 == 0;
  });
}

Toy2DResult toy_image_fit(const Image& target, double stride, ActivationMode mode,
                          const Toy2DOptions& opts) {
  if (!(stride >= 1.0)) throw std::invalid_argument("stride must be >= 1");
  if (stride > std::min(target.width, target.height))
    throw std::invalid_argument("stride larger than the image");
  for (double p : target.px)
    if (p != 0.0 && p != 1.0) throw std::invalid_argument("target must be binary");

  const int W = target.width, H = target.height;
  Grid2D grid;
  grid.nx = std::max(2, static_cast<int>(std::ceil(W / stride)));
  grid.ny = std::max(2, static_cast<int>(std::ceil(H / stride)));
  grid.w = W;
  grid.h = H;
  grid.v.assign(static_cast<std::size_t>(grid.nx) * grid.ny, 0.0);
  Rng rng(opts.seed);
  for (double& x : grid.v) x = rng.uniform(-0.01, 0.01);

  const double d = opts.delta_render;
  const ActivationBias bias{0.0};
  const std::size_t npx = static_cast<std::size_t>(W) * H;
  std::vector<double> grad(grid.v.size());
  AdamState adam(opts.lr, grid.v.size());

  auto predict = [&](const Grid2D::Stencil& st) {
    switch (mode) {
      case ActivationMode::post: {
        double raw = 0;
        for (int j = 0; j < 4; ++j) raw += st.wt[j] * grid.v[st.idx[j]];
        return alpha_from_sigma(softplus_shifted(raw, bias), d);
      }
      case ActivationMode::in: {
        double sigma = 0;
        for (int j = 0; j < 4; ++j) sigma += st.wt[j] * softplus_shifted(grid.v[st.idx[j]], bias);
        return alpha_from_sigma(sigma, d);
      }
      case ActivationMode::pre:
      default: {
        double alpha = 0;
        for (int j = 0; j < 4; ++j)
          alpha += st.wt[j] * alpha_from_sigma(softplus_shifted(grid.v[st.idx[j]], bias), d);
        return alpha;
      }
    }
  };

  double mse = 0.0;
  for (int it = 0; it < opts.iters; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    mse = 0.0;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        auto st = grid.stencil(x + 0.5, y + 0.5);
        double pred = predict(st);
        double t = target.at(x, y, 0);
        double diff = pred - t;
        mse += diff * diff;
        double up = 2.0 * diff / static_cast<double>(npx);
        switch (mode) {
          case ActivationMode::post: {
            double raw = 0;
            for (int j = 0; j < 4; ++j) raw += st.wt[j] * grid.v[st.idx[j]];
            double g = up * alpha_from_sigma_grad(softplus_shifted(raw, bias), d) *
                       softplus_shifted_grad(raw, bias);
            for (int j = 0; j < 4; ++j) grad[st.idx[j]] += g * st.wt[j];
            break;
          }
          case ActivationMode::in: {
            double sigma = 0;
            for (int j = 0; j < 4; ++j)
              sigma += st.wt[j] * softplus_shifted(grid.v[st.idx[j]], bias);
            double g = up * alpha_from_sigma_grad(sigma, d);
            for (int j = 0; j < 4; ++j)
              grad[st.idx[j]] += g * st.wt[j] * softplus_shifted_grad(grid.v[st.idx[j]], bias);
            break;
          }
          case ActivationMode::pre: {
            for (int j = 0; j < 4; ++j) {
              double sj = softplus_shifted(grid.v[st.idx[j]], bias);
              grad[st.idx[j]] += up * st.wt[j] * alpha_from_sigma_grad(sj, d) *
                                 softplus_shifted_grad(grid.v[st.idx[j]], bias);
            }
            break;
          }
        }
      }
    mse /= static_cast<double>(npx);
    adam_step(adam, grid.v, grad, 1.0);
  }

  Toy2DResult res;
  res.fitted = Image(W, H, 3);
  double final_mse = 0.0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double pred = predict(grid.stencil(x + 0.5, y + 0.5));
      res.fitted.set_rgb(x, y, {pred, pred, pred});
      double diff = pred - target.at(x, y, 0);
      final_mse += diff * diff;
    }
  res.mse = final_mse / static_cast<double>(npx);
  res.psnr = res.mse <= 0 ? 99.0 : std::min(99.0, 10.0 * std::log10(1.0 / res.mse));
  return res;
}

}  // namespace dvgo
