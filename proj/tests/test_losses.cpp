#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dvgo/adam.hpp"
#include "dvgo/losses.hpp"
#include "dvgo/rng.hpp"
#include "support/finite_diff.hpp"

using namespace dvgo;

TEST_CASE("photometric_loss: zero, unit offset, two-ray mean") {
  std::vector<Rgb> a{{0.5, 0.5, 0.5}};
  CHECK(photometric_loss(a, a) == 0.0);

  std::vector<Rgb> pred{{1, 0.5, 0.5}};
  std::vector<Rgb> target{{0, 0.5, 0.5}};
  CHECK(photometric_loss(pred, target) == doctest::Approx(1.0));

  std::vector<Rgb> p2{{1, 0, 0}, {0, 0, 0}};
  std::vector<Rgb> t2{{0, 0, 0}, {0, 0, 0}};
  CHECK(photometric_loss(p2, t2) == doctest::Approx(0.5));

  CHECK_THROWS_AS(photometric_loss({}, {}), std::invalid_argument);
}

TEST_CASE("per_point_rgb_loss: anchors") {
  Rgb target{0.5, 0.5, 0.5};
  std::vector<Rgb> same(3, target);
  CHECK(per_point_rgb_loss({0.2, 0.3, 0.1}, same, target) == 0.0);

  std::vector<Rgb> off{{0.1, 0.9, 0.2}};
  CHECK(per_point_rgb_loss({0.0}, off, target) == doctest::Approx(0.0));

  std::vector<Rgb> one{{0.5, 1.5, 0.5}};
  CHECK(per_point_rgb_loss({1.0}, one, target) == doctest::Approx(1.0));
}

TEST_CASE("per_point_rgb_loss gradient flows to colors only") {
  Rng rng(1);
  std::vector<double> weights{0.4, 0.1, 0.25};
  std::vector<Rgb> colors{{0.2, 0.4, 0.6}, {0.9, 0.1, 0.5}, {0.3, 0.3, 0.3}};
  Rgb target{0.5, 0.2, 0.8};
  std::vector<Rgb> d_colors;
  per_point_rgb_loss_backward(weights, colors, target, 1.0, d_colors);

  std::vector<double> flat(9);
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) flat[3 * i + c] = colors[i][c];
  auto loss = [&]() {
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < 3; ++c) colors[i][c] = flat[3 * i + c];
    return per_point_rgb_loss(weights, colors, target);
  };
  std::vector<double> fd = testsupport::central_diff_vector(flat, loss, 1e-6);
  std::vector<double> got(9);
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) got[3 * i + c] = d_colors[i][c];
  CHECK(testsupport::max_rel_error(got, fd) < 1e-6);
}

TEST_CASE("background_entropy_loss: endpoints, maximum, direct value") {
  CHECK(background_entropy_loss(0.0) < 2e-5);
  CHECK(background_entropy_loss(1.0) < 2e-5);
  CHECK(background_entropy_loss(0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(background_entropy_loss(0.25) == doctest::Approx(0.562335).epsilon(1e-5));
  for (double p : {0.0, 0.1, 0.37, 0.5, 0.99, 1.0}) CHECK(background_entropy_loss(p) >= 0.0);
}

TEST_CASE("background_entropy_loss gradient matches finite differences") {
  for (double p : {0.1, 0.3, 0.5, 0.77, 0.9}) {
    double fd = testsupport::central_diff([](double x) { return background_entropy_loss(x); },
                                          p, 1e-7);
    CHECK(background_entropy_loss_grad(p) == doctest::Approx(fd).epsilon(1e-5));
  }
  CHECK(background_entropy_loss_grad(0.0) == 0.0);
  CHECK(background_entropy_loss_grad(1.0) == 0.0);
}

namespace {

Camera axis_camera(Vec3 eye, Vec3 target, double near, double far, int size = 32,
                   double focal_mult = 0.5) {
  return Camera::look_at(eye, target, {0, 0, 1}, focal_mult * size, focal_mult * size,
                         size / 2.0, size / 2.0, size, size, near, far);
}

}  // namespace

TEST_CASE("view_count_scale: one camera seeing everything, points behind cameras") {
  DenseGrid grid(1, {3, 3, 3}, {{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}});
  // ~53 degree fov camera 4 units back sees the whole unit box
  Camera cam = axis_camera({-4, 0, 0}, {0, 0, 0}, 1.0, 8.0);
  std::vector<double> scale = view_count_scale(grid, {cam});
  for (double s : scale) CHECK(s == 1.0);

  // a camera looking away sees nothing; fallback keeps all scales at 1
  Camera away = axis_camera({-4, 0, 0}, {-8, 0, 0}, 1.0, 2.0);
  std::vector<double> none = view_count_scale(grid, {away});
  for (double s : none) CHECK(s == 1.0);
}

TEST_CASE("view_count_scale: half-overlapping frustums give 1.0 and 0.5") {
  // grid along y; one camera sees all of it, a narrow camera only the y<0 end
  DenseGrid grid(1, {2, 5, 2}, {{-0.1, -1.0, -0.1}, {0.1, 1.0, 0.1}});
  Camera wide = axis_camera({-6, 0, 0}, {0, 0, 0}, 1.0, 12.0);
  Camera half = axis_camera({-6, -1, 0}, {6, -1, 0}, 1.0, 12.0, 32, 4.0);  // ~14 deg fov
  std::vector<double> scale = view_count_scale(grid, {wide, half});
  std::size_t j = 0;
  bool saw_half = false, saw_full = false;
  for (int ix = 0; ix < 2; ++ix)
    for (int iy = 0; iy < 5; ++iy)
      for (int iz = 0; iz < 2; ++iz, ++j) {
        Vec3 p = grid.point_position(ix, iy, iz);
        int brute = 0;
        for (const Camera* c : {&wide, &half})
          if (frustum_contains(*c, p)) ++brute;
        CHECK(scale[j] == doctest::Approx(brute / 2.0));
        if (brute == 1) saw_half = true;
        if (brute == 2) saw_full = true;
      }
  CHECK(saw_half);
  CHECK(saw_full);
}

TEST_CASE("view_count_scale: order invariance") {
  Rng rng(2);
  DenseGrid grid(1, {3, 3, 3}, {{-1, -1, -1}, {1, 1, 1}});
  std::vector<Camera> cams;
  for (int i = 0; i < 4; ++i) {
    double az = rng.uniform(0, 2 * M_PI);
    cams.push_back(axis_camera({4 * std::cos(az), 4 * std::sin(az), 1.0}, {0, 0, 0}, 1.0, 7.0));
  }
  std::vector<double> fwd = view_count_scale(grid, cams);
  std::reverse(cams.begin(), cams.end());
  std::vector<double> rev = view_count_scale(grid, cams);
  CHECK(fwd == rev);
}

TEST_CASE("adam_step: zero gradient leaves parameters untouched") {
  AdamState st(0.1, 3);
  std::vector<double> params{1.0, -2.0, 0.5};
  std::vector<double> grads(3, 0.0);
  std::vector<double> before = params;
  adam_step(st, params, grads, 1.0);
  CHECK(params == before);
}

TEST_CASE("lr decay factor hits 0.1 at 20k and decreases monotonically") {
  CHECK(lr_decay_factor(0) == 1.0);
  CHECK(lr_decay_factor(20000) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(lr_decay_factor(40000) == doctest::Approx(0.01).epsilon(1e-12));
  double prev = 2.0;
  for (int t = 0; t < 50000; t += 500) {
    double f = lr_decay_factor(t);
    CHECK(f <= prev);
    prev = f;
  }
}

TEST_CASE("adam_step: first step moves by ~lr for a constant gradient") {
  AdamState st(0.1, 1);
  std::vector<double> params{2.0};
  std::vector<double> grads{1.0};
  adam_step(st, params, grads, 1.0);
  // bias-corrected first step: lr * g/|g| up to eps
  CHECK(params[0] == doctest::Approx(2.0 - 0.1).epsilon(1e-6));
}

TEST_CASE("adam_step: per-parameter scale 0 freezes parameters exactly") {
  Rng rng(3);
  AdamState st(0.5, 4);
  std::vector<double> params{1, 2, 3, 4};
  std::vector<double> scale{0.0, 1.0, 0.0, 0.25};
  for (int it = 0; it < 10; ++it) {
    std::vector<double> grads{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                              rng.uniform(-1, 1)};
    adam_step(st, params, grads, 1.0, scale);
  }
  CHECK(params[0] == 1.0);
  CHECK(params[2] == 3.0);
  CHECK(params[1] != 2.0);
  CHECK(params[3] != 4.0);
}

TEST_CASE("adam_step: shape mismatches rejected") {
  AdamState st(0.1, 2);
  std::vector<double> params{1.0, 2.0};
  std::vector<double> bad{1.0};
  CHECK_THROWS_AS(adam_step(st, params, bad, 1.0), std::invalid_argument);
}

TEST_CASE("weighted total loss is linear in the weights") {
  double photo = 0.82, pt = 0.31, bg = 0.44;
  LossWeights w{1.0, 0.1, 0.01};
  double total = w.photo * photo + w.pt_rgb * pt + w.bg * bg;
  LossWeights w2{2.0, 0.2, 0.02};
  double total2 = w2.photo * photo + w2.pt_rgb * pt + w2.bg * bg;
  CHECK(std::abs(total2 - 2.0 * total) < 1e-12);
  CHECK(LossWeights::coarse_defaults().pt_rgb == doctest::Approx(1e-1));
  CHECK(LossWeights::coarse_defaults().bg == doctest::Approx(1e-2));
  CHECK(LossWeights::fine_defaults().pt_rgb == doctest::Approx(1e-2));
  CHECK(LossWeights::fine_defaults().bg == doctest::Approx(1e-3));
}
