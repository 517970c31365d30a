#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dvgo/camera.hpp"
#include "dvgo/compositor.hpp"
#include "dvgo/rng.hpp"
#include "dvgo/sampling.hpp"
#include "support/finite_diff.hpp"

using namespace dvgo;

namespace {

Camera identity_camera(int w = 8, int h = 6) {
  Camera cam;
  cam.c2w = Camera::identity_pose();
  cam.fx = cam.fy = 10.0;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  cam.width = w;
  cam.height = h;
  cam.near = 0.5;
  cam.far = 4.0;
  return cam;
}

}  // namespace

TEST_CASE("make_rays: principal-point pixel looks down the forward axis") {
  Camera cam = identity_camera();
  // pixel center (u+0.5, v+0.5) == (cx, cy)
  cam.cx = 3.5;
  cam.cy = 2.5;
  Ray r = make_rays(cam, {{3, 2}}).front();
  CHECK(r.dir.x == doctest::Approx(0.0));
  CHECK(r.dir.y == doctest::Approx(0.0));
  CHECK(r.dir.z == doctest::Approx(-1.0));
}

TEST_CASE("make_rays: one focal length right of center") {
  Camera cam = identity_camera(64, 64);
  cam.fx = cam.fy = 16.0;
  cam.cx = 16.5;
  cam.cy = 32.5;
  Ray r = make_rays(cam, {{32, 32}}).front();  // u+0.5-cx = 16 = fx
  double s = 1.0 / std::sqrt(2.0);
  CHECK(r.dir.x == doctest::Approx(s));
  CHECK(r.dir.y == doctest::Approx(0.0));
  CHECK(r.dir.z == doctest::Approx(-s));
}

TEST_CASE("make_rays: origin equals the pose translation") {
  Camera cam = identity_camera();
  cam.c2w[0][3] = 1.5;
  cam.c2w[1][3] = -2.0;
  cam.c2w[2][3] = 0.25;
  Ray r = make_rays(cam, {{0, 0}}).front();
  CHECK(r.origin.x == 1.5);
  CHECK(r.origin.y == -2.0);
  CHECK(r.origin.z == 0.25);
  CHECK(norm(r.dir) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("make_rays rejects out-of-bounds pixels") {
  Camera cam = identity_camera();
  CHECK_THROWS_AS(make_rays(cam, {{8, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(make_rays(cam, {{0, -1}}), std::invalid_argument);
}

TEST_CASE("camera validation flags a skewed rotation") {
  Camera cam = identity_camera();
  cam.c2w[0][1] = 0.1;
  CHECK_THROWS_AS(validate(cam), std::invalid_argument);
}

TEST_CASE("sample_along_ray: direct evaluation") {
  Ray ray{{0, 0, 0}, {1, 0, 0}};
  SampleBatch b = sample_along_ray(ray, 0.0, 1.0, 0.5);
  REQUIRE(b.size() == 3);
  CHECK(b.points[0].x == doctest::Approx(0.0));
  CHECK(b.points[1].x == doctest::Approx(0.5));
  CHECK(b.points[2].x == doctest::Approx(1.0));
  for (double d : b.deltas) CHECK(d == 0.5);
}

TEST_CASE("sample_along_ray: giant step still yields one stepped point") {
  Ray ray{{0, 0, 0}, {0, 1, 0}};
  SampleBatch b = sample_along_ray(ray, 1.0, 1.5, 10.0);
  CHECK(b.size() == 2);  // x_0 plus one stepped point
}

TEST_CASE("sample_along_ray: unit direction spacing") {
  Ray ray{{1, 2, 3}, normalized(Vec3{1, 1, 0})};
  SampleBatch b = sample_along_ray(ray, 0.25, 2.0, 0.3);
  for (std::size_t i = 1; i < b.size(); ++i)
    CHECK(norm(b.points[i] - b.points[i - 1]) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("jitter_samples: endpoints and rigidity") {
  Ray ray{{0, 0, 0}, {0, 0, 1}};
  SampleBatch base = sample_along_ray(ray, 0.5, 2.0, 0.25);
  SampleBatch zero = base;
  jitter_samples(zero, ray, 0.25, 0.0);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(zero.points[i].z == base.points[i].z);

  SampleBatch one = base;
  jitter_samples(one, ray, 0.25, 1.0);
  for (std::size_t i = 0; i < base.size(); ++i)
    CHECK(one.points[i].z == doctest::Approx(base.points[i].z + 0.25).epsilon(1e-12));

  SampleBatch frac = base;
  jitter_samples(frac, ray, 0.25, 0.37);
  for (std::size_t i = 1; i < base.size(); ++i)
    CHECK(norm(frac.points[i] - frac.points[i - 1]) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softplus_shifted: anchor values and asymptotics") {
  CHECK(softplus_shifted(0.0, {0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(softplus_shifted(-1000.0, {0.0}) == doctest::Approx(0.0));
  CHECK(softplus_shifted(90.0, {10.0}) == doctest::Approx(100.0).epsilon(1e-9));
  // branch continuity around the cutoffs
  CHECK(softplus_shifted(30.0 + 1e-9, {0.0}) ==
        doctest::Approx(softplus_shifted(30.0 - 1e-9, {0.0})).epsilon(1e-9));
  CHECK(softplus_shifted(-30.0 - 1e-9, {0.0}) ==
        doctest::Approx(softplus_shifted(-30.0 + 1e-9, {0.0})).epsilon(1e-9));
}

TEST_CASE("alpha_from_sigma: anchors") {
  CHECK(alpha_from_sigma(0.0, 0.7) == 0.0);
  CHECK(alpha_from_sigma(std::log(2.0), 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(alpha_from_sigma(1e9, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("low_density_bias: exact cancellation and direct evaluation") {
  CHECK(low_density_bias(0.5, 1.0).b == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(low_density_bias(1e-6, 1.0).b == doctest::Approx(std::log(1.000001e-6)).epsilon(1e-6));
  CHECK_THROWS_AS(low_density_bias(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(low_density_bias(1.0, 1.0), std::invalid_argument);
}

TEST_CASE("low_density_bias composes to the target transmittance decay") {
  // zero grid + bias from the closed form: compounded transmittance over any
  // partition of a voxel-size distance recovers 1 - alpha_init
  Rng rng(3);
  for (double alpha_init : {1e-6, 1e-2, 0.5})
    for (double s : {0.3, 1.0, 2.7}) {
      ActivationBias b = low_density_bias(alpha_init, s);
      double sigma = softplus_shifted(0.0, b);
      for (int n : {1, 2, 7, 100}) {
        // random positive partition of s
        std::vector<double> parts(n);
        double total = 0;
        for (double& p : parts) {
          p = rng.uniform(0.1, 1.0);
          total += p;
        }
        double T = 1.0;
        for (double& p : parts) {
          p *= s / total;
          T *= 1.0 - alpha_from_sigma(sigma, p);
        }
        CHECK(std::abs(T - (1.0 - alpha_init)) < 1e-9);
      }
    }
}

TEST_CASE("activated_alpha: all modes agree on constant grids and at corners") {
  Bbox3 box{{0, 0, 0}, {1, 1, 1}};
  DenseGrid g(1, {3, 3, 3}, box);
  g.fill(0.8);
  ActivationBias bias{0.3};
  for (Vec3 p : {Vec3{0.31, 0.57, 0.93}, Vec3{0.5, 0.5, 0.5}}) {
    double post = activated_alpha(g, p, 0.4, bias, ActivationMode::post);
    double in = activated_alpha(g, p, 0.4, bias, ActivationMode::in);
    double pre = activated_alpha(g, p, 0.4, bias, ActivationMode::pre);
    CHECK(std::abs(post - in) < 1e-12);
    CHECK(std::abs(post - pre) < 1e-12);
  }

  Rng rng(4);
  DenseGrid h(1, {3, 3, 3}, box);
  for (double& v : h.values()) v = rng.uniform(-2, 2);
  Vec3 corner = h.point_position(1, 2, 0);
  double post = activated_alpha(h, corner, 0.4, bias, ActivationMode::post);
  CHECK(activated_alpha(h, corner, 0.4, bias, ActivationMode::in) ==
        doctest::Approx(post).epsilon(1e-12));
  CHECK(activated_alpha(h, corner, 0.4, bias, ActivationMode::pre) ==
        doctest::Approx(post).epsilon(1e-12));
}

TEST_CASE("activated_alpha: post mode realizes the sharp split cell") {
  // 1D-embedded cell, endpoint values from the closed-form table
  Bbox3 box{{0, 0, 0}, {1, 1, 1}};
  DenseGrid g(1, {2, 2, 2}, box);
  for (int iy = 0; iy < 2; ++iy)
    for (int iz = 0; iz < 2; ++iz) {
      g.at(0, 0, iy, iz) = -865.0;
      g.at(0, 1, iy, iz) = 867.2;
    }
  double lo = activated_alpha(g, {0.49, 0.5, 0.5}, 0.5, {0.0}, ActivationMode::post);
  double hi = activated_alpha(g, {0.51, 0.5, 0.5}, 0.5, {0.0}, ActivationMode::post);
  CHECK(lo <= 1e-4);
  CHECK(hi >= 1.0 - 1e-4);
}

TEST_CASE("activated_alpha: post mode monotone in each corner value") {
  Rng rng(5);
  Bbox3 box{{0, 0, 0}, {1, 1, 1}};
  DenseGrid g(1, {2, 2, 2}, box);
  for (double& v : g.values()) v = rng.uniform(-1, 1);
  Vec3 p{0.37, 0.61, 0.22};
  double base = activated_alpha(g, p, 0.5, {0.0}, ActivationMode::post);
  for (std::size_t j = 0; j < 8; ++j) {
    DenseGrid bumped = g;
    bumped.values()[j] += 0.25;
    CHECK(activated_alpha(bumped, p, 0.5, {0.0}, ActivationMode::post) >= base);
  }
}

TEST_CASE("composite: all-transparent, opaque-first, hand-evaluated two-point") {
  Rgb bg{0.2, 0.4, 0.6};
  RenderResult r0 = composite({0, 0, 0}, {Rgb{1, 0, 0}, Rgb{0, 1, 0}, Rgb{0, 0, 1}}, bg);
  CHECK(r0.color[0] == doctest::Approx(0.2));
  CHECK(r0.bg_transmittance == doctest::Approx(1.0));

  RenderResult r1 = composite({1.0, 0.7}, {Rgb{0.3, 0.9, 0.1}, Rgb{1, 1, 1}}, bg);
  CHECK(r1.color[0] == doctest::Approx(0.3));
  CHECK(r1.color[1] == doctest::Approx(0.9));
  CHECK(r1.weights[1] == doctest::Approx(0.0));

  RenderResult r2 = composite({0.5, 0.5}, {Rgb{1, 0, 0}, Rgb{0, 1, 0}}, {0, 0, 0});
  CHECK(r2.color[0] == doctest::Approx(0.5));
  CHECK(r2.color[1] == doctest::Approx(0.25));
  CHECK(r2.color[2] == doctest::Approx(0.0));
}

TEST_CASE("composite conservation: weights plus background transmittance is 1") {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t n = 1 + rng.index(64);
    std::vector<double> alphas(n);
    std::vector<Rgb> colors(n, Rgb{0.5, 0.5, 0.5});
    for (double& a : alphas) a = rng.uniform();
    RenderResult r = composite(alphas, colors, {1, 1, 1});
    double sum = r.bg_transmittance;
    for (double w : r.weights) sum += w;
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("composite_backward: single point and zero upstream") {
  std::vector<double> alphas{0.37};
  std::vector<Rgb> colors{{0.2, 0.5, 0.9}};
  CompositeUpstream up;
  up.d_color = {1, 0, 0};
  std::vector<double> da;
  std::vector<Rgb> dc;
  composite_backward(alphas, colors, {0, 0, 0}, up, da, dc);
  CHECK(dc[0][0] == doctest::Approx(0.37));  // dC/dc_1 = alpha_1
  CHECK(dc[0][1] == doctest::Approx(0.0));

  CompositeUpstream zero;
  composite_backward(alphas, colors, {0, 0, 0}, zero, da, dc);
  CHECK(da[0] == 0.0);
  CHECK(dc[0][0] == 0.0);
}

TEST_CASE("composite_backward matches finite differences on random rays") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 5;
    std::vector<double> alphas(n);
    std::vector<Rgb> colors(n);
    for (std::size_t i = 0; i < n; ++i) {
      alphas[i] = rng.uniform(0.05, 0.95);
      colors[i] = {rng.uniform(), rng.uniform(), rng.uniform()};
    }
    Rgb bg{rng.uniform(), rng.uniform(), rng.uniform()};
    CompositeUpstream up;
    up.d_color = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    up.d_weights.resize(n);
    for (double& w : up.d_weights) w = rng.uniform(-1, 1);
    up.d_bg_transmittance = rng.uniform(-1, 1);

    auto loss = [&]() {
      RenderResult r = composite(alphas, colors, bg);
      double L = 0;
      for (int c = 0; c < 3; ++c) L += up.d_color[c] * r.color[c];
      for (std::size_t i = 0; i < n; ++i) L += up.d_weights[i] * r.weights[i];
      return L + up.d_bg_transmittance * r.bg_transmittance;
    };

    std::vector<double> da;
    std::vector<Rgb> dc;
    composite_backward(alphas, colors, bg, up, da, dc);
    std::vector<double> fd_a = testsupport::central_diff_vector(alphas, loss, 1e-6);
    CHECK(testsupport::max_rel_error(da, fd_a) < 1e-5);

    std::vector<double> flat_c(3 * n), d_flat(3 * n);
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) {
        flat_c[3 * i + c] = colors[i][c];
        d_flat[3 * i + c] = dc[i][c];
      }
    auto loss_c = [&]() {
      for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) colors[i][c] = flat_c[3 * i + c];
      return loss();
    };
    std::vector<double> fd_c = testsupport::central_diff_vector(flat_c, loss_c, 1e-6);
    CHECK(testsupport::max_rel_error(d_flat, fd_c) < 1e-5);
  }
}

TEST_CASE("composite_backward handles an opaque point exactly") {
  std::vector<double> alphas{0.3, 1.0, 0.4};
  std::vector<Rgb> colors{{0.1, 0.2, 0.3}, {0.9, 0.8, 0.7}, {0.5, 0.5, 0.5}};
  CompositeUpstream up;
  up.d_color = {1, 1, 1};
  std::vector<double> da;
  std::vector<Rgb> dc;
  composite_backward(alphas, colors, {0, 0, 0}, up, da, dc);
  for (double g : da) CHECK(std::isfinite(g));
  CHECK(dc[2][0] == doctest::Approx(0.0));  // fully occluded point
}

TEST_CASE("full chain gradient: grid -> softplus -> alpha -> composite -> loss") {
  Rng rng(8);
  Bbox3 box{{0, 0, 0}, {1, 1, 1}};
  for (int trial = 0; trial < 10; ++trial) {
    DenseGrid density(1, {3, 3, 3}, box);
    for (double& v : density.values()) v = rng.uniform(-3, 3);
    ActivationBias bias{rng.uniform(-1, 1)};
    const double delta = 0.3;
    std::vector<Vec3> pts;
    for (int i = 0; i < 5; ++i)
      pts.push_back({rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)});
    std::vector<Rgb> colors(5, Rgb{0.6, 0.2, 0.8});
    Rgb bg{1, 1, 1};
    Rgb target{0.1, 0.9, 0.4};

    auto loss = [&]() {
      std::vector<double> alphas;
      for (Vec3 p : pts)
        alphas.push_back(
            alpha_from_sigma(softplus_shifted(trilinear_sample1(density, p), bias), delta));
      RenderResult r = composite(alphas, colors, bg);
      return sq_dist(r.color, target);
    };

    // analytic gradient through the full chain
    std::vector<double> alphas;
    std::vector<double> raws;
    for (Vec3 p : pts) {
      double raw = trilinear_sample1(density, p);
      raws.push_back(raw);
      alphas.push_back(alpha_from_sigma(softplus_shifted(raw, bias), delta));
    }
    RenderResult r = composite(alphas, colors, bg);
    CompositeUpstream up;
    for (int c = 0; c < 3; ++c) up.d_color[c] = 2.0 * (r.color[c] - target[c]);
    std::vector<double> da;
    std::vector<Rgb> dc;
    composite_backward(alphas, colors, bg, up, da, dc);
    std::vector<double> grad(density.size(), 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double d_raw =
          da[i] * delta * (1.0 - alphas[i]) * softplus_shifted_grad(raws[i], bias);
      trilinear_backward(density, pts[i], &d_raw, grad);
    }
    std::vector<double> fd = testsupport::central_diff_vector(density.values(), loss, 1e-5);
    CHECK(testsupport::max_rel_error(grad, fd, 1e-7) < 1e-4);
  }
}

TEST_CASE("RenderResult conservation invariant holds with early-opaque rays") {
  RenderResult r = composite({1.0, 0.5}, {Rgb{1, 1, 1}, Rgb{0, 0, 0}}, {0.5, 0.5, 0.5});
  double sum = r.bg_transmittance;
  for (double w : r.weights) sum += w;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}
