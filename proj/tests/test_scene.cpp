#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dvgo/compositor.hpp"
#include "dvgo/scene.hpp"
#include "support/finite_diff.hpp"

using namespace dvgo;

namespace {

Bbox3 unit_cube() { return {{0, 0, 0}, {1, 1, 1}}; }

CoarseScene zero_coarse(std::array<int, 3> dims = {3, 3, 3}) {
  CoarseScene s;
  s.density = DenseGrid(1, dims, unit_cube());
  s.rgb = DenseGrid(3, dims, unit_cube());
  s.step = 0.25;
  return s;
}

FineScene small_fine(Rng& rng, int D = 4, int hidden = 16) {
  FineScene s;
  s.density = DenseGrid(1, {3, 3, 3}, unit_cube());
  s.feat = DenseGrid(D, {3, 3, 3}, unit_cube());
  s.posenc_x = 2;
  s.posenc_d = 1;
  s.step = 0.25;
  s.mlp = MlpParams::create(s.mlp_input_dim(), hidden, 2, 3, rng);
  return s;
}

std::vector<double> flatten_mlp(const MlpParams& mlp) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < mlp.W.size(); ++l) {
    flat.insert(flat.end(), mlp.W[l].data(), mlp.W[l].data() + mlp.W[l].size());
    flat.insert(flat.end(), mlp.b[l].data(), mlp.b[l].data() + mlp.b[l].size());
  }
  return flat;
}

void unflatten_mlp(MlpParams& mlp, const std::vector<double>& flat) {
  std::size_t k = 0;
  for (std::size_t l = 0; l < mlp.W.size(); ++l) {
    std::copy(flat.begin() + k, flat.begin() + k + mlp.W[l].size(), mlp.W[l].data());
    k += mlp.W[l].size();
    std::copy(flat.begin() + k, flat.begin() + k + mlp.b[l].size(), mlp.b[l].data());
    k += mlp.b[l].size();
  }
}

std::vector<double> flatten_grads(const MlpGrads& g) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < g.dW.size(); ++l) {
    flat.insert(flat.end(), g.dW[l].data(), g.dW[l].data() + g.dW[l].size());
    flat.insert(flat.end(), g.db[l].data(), g.db[l].data() + g.db[l].size());
  }
  return flat;
}

}  // namespace

TEST_CASE("positional_encoding: k=0 passthrough, zeros, direct slots") {
  Vec3 v{1, 0, 0};
  auto e0 = positional_encoding(v, 0);
  REQUIRE(e0.size() == 3);
  CHECK(e0[0] == 1.0);

  auto ez = positional_encoding({0, 0, 0}, 3);
  REQUIRE(ez.size() == 21);
  for (int j = 0; j < 3; ++j) {
    for (int a = 0; a < 3; ++a) CHECK(ez[3 + 6 * j + a] == doctest::Approx(0.0));      // sin
    for (int a = 0; a < 3; ++a) CHECK(ez[3 + 6 * j + 3 + a] == doctest::Approx(1.0));  // cos
  }

  auto e2 = positional_encoding(v, 2);
  REQUIRE(e2.size() == 15);
  CHECK(e2[3] == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
  CHECK(e2[6] == doctest::Approx(std::cos(1.0)).epsilon(1e-12));
  CHECK(e2[9] == doctest::Approx(std::sin(2.0)).epsilon(1e-12));
  CHECK(e2[12] == doctest::Approx(std::cos(2.0)).epsilon(1e-12));
}

TEST_CASE("positional_encoding: length 3+6k and determinism") {
  Rng rng(1);
  for (int k = 0; k <= 6; ++k) {
    Vec3 v{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)};
    auto a = positional_encoding(v, k);
    auto b = positional_encoding(v, k);
    REQUIRE(a.size() == static_cast<std::size_t>(3 + 6 * k));
    CHECK(a == b);
    // doubled-angle recurrence against direct evaluation
    for (int j = 0; j < k; ++j) {
      double f = std::pow(2.0, j);
      CHECK(a[3 + 6 * j] == doctest::Approx(std::sin(f * v.x)).epsilon(1e-9));
      CHECK(a[3 + 6 * j + 3] == doctest::Approx(std::cos(f * v.x)).epsilon(1e-9));
    }
  }
}

TEST_CASE("query_coarse: zero grids give raw 0 and mid-gray") {
  CoarseScene s = zero_coarse();
  SceneQuery q = query_coarse(s, {0.3, 0.7, 0.2});
  CHECK(q.raw_density == doctest::Approx(0.0));
  CHECK(q.rgb[0] == doctest::Approx(0.5));
  CHECK(q.rgb[1] == doctest::Approx(0.5));
  CHECK(q.rgb[2] == doctest::Approx(0.5));
}

TEST_CASE("query_coarse: corner query returns stored values through the sigmoid") {
  CoarseScene s = zero_coarse();
  s.density.at(0, 1, 1, 1) = 2.5;
  s.rgb.at(0, 1, 1, 1) = 1.2;
  s.rgb.at(1, 1, 1, 1) = -0.4;
  Vec3 corner = s.density.point_position(1, 1, 1);
  SceneQuery q = query_coarse(s, corner);
  CHECK(q.raw_density == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(q.rgb[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.2))).epsilon(1e-12));
  CHECK(q.rgb[1] == doctest::Approx(1.0 / (1.0 + std::exp(0.4))).epsilon(1e-12));
}

TEST_CASE("query_coarse matches an independent scalar reimplementation") {
  Rng rng(2);
  CoarseScene s = zero_coarse({3, 4, 3});
  for (double& v : s.density.values()) v = rng.uniform(-2, 2);
  for (double& v : s.rgb.values()) v = rng.uniform(-2, 2);
  for (int trial = 0; trial < 50; ++trial) {
    Vec3 p{rng.uniform(), rng.uniform(), rng.uniform()};
    // reference: explicit weight expansion over the 8 corners
    const DenseGrid& g = s.density;
    Vec3 gc = g.world_to_grid(p);
    int i0 = std::min(static_cast<int>(gc.x), g.dims()[0] - 2);
    int j0 = std::min(static_cast<int>(gc.y), g.dims()[1] - 2);
    int k0 = std::min(static_cast<int>(gc.z), g.dims()[2] - 2);
    double fx = gc.x - i0, fy = gc.y - j0, fz = gc.z - k0;
    double want_raw = 0.0;
    Rgb want_logit{0, 0, 0};
    for (int dx = 0; dx < 2; ++dx)
      for (int dy = 0; dy < 2; ++dy)
        for (int dz = 0; dz < 2; ++dz) {
          double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
          want_raw += w * s.density.at(0, i0 + dx, j0 + dy, k0 + dz);
          for (int c = 0; c < 3; ++c) want_logit[c] += w * s.rgb.at(c, i0 + dx, j0 + dy, k0 + dz);
        }
    SceneQuery q = query_coarse(s, p);
    CHECK(q.raw_density == doctest::Approx(want_raw).epsilon(1e-12));
    for (int c = 0; c < 3; ++c)
      CHECK(q.rgb[c] == doctest::Approx(1.0 / (1.0 + std::exp(-want_logit[c]))).epsilon(1e-12));
  }
}

TEST_CASE("coarse raw density is linear in the grid values") {
  Rng rng(3);
  CoarseScene s1 = zero_coarse(), s2 = zero_coarse(), mix = zero_coarse();
  for (std::size_t i = 0; i < s1.density.size(); ++i) {
    s1.density.values()[i] = rng.uniform(-2, 2);
    s2.density.values()[i] = rng.uniform(-2, 2);
  }
  const double a = 0.7, b = -1.9;
  for (std::size_t i = 0; i < mix.density.size(); ++i)
    mix.density.values()[i] = a * s1.density.values()[i] + b * s2.density.values()[i];
  for (int trial = 0; trial < 30; ++trial) {
    Vec3 p{rng.uniform(), rng.uniform(), rng.uniform()};
    double want = a * query_coarse(s1, p).raw_density + b * query_coarse(s2, p).raw_density;
    CHECK(query_coarse(mix, p).raw_density == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("mlp_forward: zero weights give sigmoid(bias)") {
  Rng rng(4);
  MlpParams mlp = MlpParams::create(5, 8, 2, 3, rng);
  for (auto& W : mlp.W) W.setZero();
  mlp.b.back() << 0.0, 1.0, -1.0;
  Eigen::MatrixXd in = Eigen::MatrixXd::Random(5, 4);
  Eigen::MatrixXd out = mlp_forward(mlp, in, nullptr);
  for (int c = 0; c < 4; ++c) {
    CHECK(out(0, c) == doctest::Approx(0.5));
    CHECK(out(1, c) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
    CHECK(out(2, c) == doctest::Approx(1.0 / (1.0 + std::exp(1.0))));
  }
}

TEST_CASE("mlp_forward: single hand-computed path") {
  // one input feeding one hidden unit feeding one output
  Rng rng(5);
  MlpParams mlp = MlpParams::create(1, 1, 1, 1, rng);
  mlp.W[0](0, 0) = 2.0;
  mlp.b[0](0) = -0.5;
  mlp.W[1](0, 0) = 3.0;
  mlp.b[1](0) = 0.25;
  Eigen::MatrixXd in(1, 1);
  in << 1.0;
  // z1 = 1.5, relu = 1.5, z2 = 4.75, sigmoid
  double want = 1.0 / (1.0 + std::exp(-4.75));
  CHECK(mlp_forward(mlp, in, nullptr)(0, 0) == doctest::Approx(want).epsilon(1e-12));
  in << -1.0;  // z1 = -2.5, relu clips to 0, z2 = 0.25
  CHECK(mlp_forward(mlp, in, nullptr)(0, 0) ==
        doctest::Approx(1.0 / (1.0 + std::exp(-0.25))).epsilon(1e-12));
}

TEST_CASE("mlp shape validation") {
  Rng rng(6);
  MlpParams mlp = MlpParams::create(4, 8, 2, 3, rng);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(5, 2);
  CHECK_THROWS_AS(mlp_forward(mlp, bad, nullptr), std::invalid_argument);
  MlpParams broken = mlp;
  broken.W[1] = Eigen::MatrixXd::Zero(8, 9);
  CHECK_THROWS_AS(validate(broken), std::invalid_argument);
}

TEST_CASE("mlp gradcheck against finite differences") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    MlpParams mlp = MlpParams::create(6, 10, 2, 3, rng);
    Eigen::MatrixXd in = Eigen::MatrixXd::Random(6, 7);
    Eigen::MatrixXd up = Eigen::MatrixXd::Random(3, 7);

    MlpTape tape;
    mlp_forward(mlp, in, &tape);
    MlpGrads grads = MlpGrads::zeros_like(mlp);
    Eigen::MatrixXd d_in;
    mlp_backward(mlp, tape, up, grads, &d_in);

    std::vector<double> flat = flatten_mlp(mlp);
    auto loss = [&]() {
      unflatten_mlp(mlp, flat);
      return (mlp_forward(mlp, in, nullptr).array() * up.array()).sum();
    };
    std::vector<double> fd = testsupport::central_diff_vector(flat, loss, 1e-6);
    unflatten_mlp(mlp, flat);
    CHECK(testsupport::max_rel_error(flatten_grads(grads), fd, 1e-6) < 1e-4);

    // input gradient as well
    std::vector<double> flat_in(in.data(), in.data() + in.size());
    auto loss_in = [&]() {
      std::copy(flat_in.begin(), flat_in.end(), in.data());
      return (mlp_forward(mlp, in, nullptr).array() * up.array()).sum();
    };
    std::vector<double> fd_in = testsupport::central_diff_vector(flat_in, loss_in, 1e-6);
    std::vector<double> got_in(d_in.data(), d_in.data() + d_in.size());
    CHECK(testsupport::max_rel_error(got_in, fd_in, 1e-6) < 1e-4);
  }
}

TEST_CASE("query_fine: zero feature grid and zero mlp give mid-gray everywhere") {
  Rng rng(8);
  FineScene s = small_fine(rng);
  for (auto& W : s.mlp.W) W.setZero();
  for (auto& b : s.mlp.b) b.setZero();
  SceneQuery q = query_fine(s, {0.4, 0.2, 0.8}, normalized(Vec3{1, 2, -1}));
  CHECK(q.rgb[0] == doctest::Approx(0.5));
  CHECK(q.rgb[1] == doctest::Approx(0.5));
  CHECK(q.rgb[2] == doctest::Approx(0.5));
}

TEST_CASE("query_fine: view dependence through a direction-coupled weight") {
  Rng rng(9);
  FineScene s = small_fine(rng);
  for (auto& W : s.mlp.W) W.setZero();
  for (auto& b : s.mlp.b) b.setZero();
  // route the first raw component of the direction encoding to the output
  int d_slot = s.feat_dim() + posenc_dim(s.posenc_x);
  s.mlp.W[0](0, d_slot) = 1.5;
  s.mlp.W[1](0, 0) = 1.5;
  s.mlp.W[2](0, 0) = 1.5;
  Vec3 x{0.5, 0.5, 0.5};
  SceneQuery qa = query_fine(s, x, {1, 0, 0});
  SceneQuery qb = query_fine(s, x, {-1, 0, 0});
  CHECK(qa.rgb[0] != doctest::Approx(qb.rgb[0]).epsilon(1e-6));
  // color always inside the sigmoid range
  for (int c = 0; c < 3; ++c) {
    CHECK(qa.rgb[c] > 0.0);
    CHECK(qa.rgb[c] < 1.0);
  }
}

TEST_CASE("query_fine color gradcheck w.r.t. mlp weights") {
  Rng rng(10);
  FineScene s = small_fine(rng);
  for (double& v : s.feat.values()) v = rng.uniform(-1, 1);
  Vec3 x{0.3, 0.6, 0.4};
  Vec3 d = normalized(Vec3{0.2, -0.7, 0.4});
  Rgb up{0.3, -1.1, 0.8};

  Eigen::MatrixXd in(s.mlp_input_dim(), 1);
  fine_mlp_input(s, x, d, in.col(0).data());
  MlpTape tape;
  mlp_forward(s.mlp, in, &tape);
  MlpGrads grads = MlpGrads::zeros_like(s.mlp);
  Eigen::MatrixXd d_out(3, 1);
  d_out << up[0], up[1], up[2];
  mlp_backward(s.mlp, tape, d_out, grads, nullptr);

  std::vector<double> flat = flatten_mlp(s.mlp);
  auto loss = [&]() {
    unflatten_mlp(s.mlp, flat);
    SceneQuery q = query_fine(s, x, d);
    return up[0] * q.rgb[0] + up[1] * q.rgb[1] + up[2] * q.rgb[2];
  };
  std::vector<double> fd = testsupport::central_diff_vector(flat, loss, 1e-6);
  unflatten_mlp(s.mlp, flat);
  CHECK(testsupport::max_rel_error(flatten_grads(grads), fd, 1e-6) < 1e-4);
}

TEST_CASE("end-to-end fine gradcheck: render loss vs density, features, mlp") {
  Rng rng(11);
  FineScene s = small_fine(rng, 3, 8);
  for (double& v : s.density.values()) v = rng.uniform(-1.5, 1.5);
  for (double& v : s.feat.values()) v = rng.uniform(-1, 1);
  s.bias.b = 0.4;
  const double delta = 0.3;
  Vec3 d = normalized(Vec3{0.3, 0.4, -0.85});
  std::vector<Vec3> pts;
  for (int i = 0; i < 5; ++i)
    pts.push_back({rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)});
  Rgb bg{1, 1, 1};
  Rgb target{0.2, 0.7, 0.4};

  auto loss = [&]() {
    std::vector<double> alphas;
    std::vector<Rgb> colors;
    for (Vec3 p : pts) {
      SceneQuery q = query_fine(s, p, d);
      alphas.push_back(alpha_from_sigma(softplus_shifted(q.raw_density, s.bias), delta));
      colors.push_back(q.rgb);
    }
    RenderResult r = composite(alphas, colors, bg);
    return sq_dist(r.color, target);
  };

  // analytic gradients through the same chain
  std::vector<double> alphas, raws;
  std::vector<Rgb> colors;
  Eigen::MatrixXd in(s.mlp_input_dim(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    SceneQuery q = query_fine(s, pts[i], d);
    raws.push_back(q.raw_density);
    alphas.push_back(alpha_from_sigma(softplus_shifted(q.raw_density, s.bias), delta));
    colors.push_back(q.rgb);
    fine_mlp_input(s, pts[i], d, in.col(i).data());
  }
  RenderResult r = composite(alphas, colors, bg);
  CompositeUpstream up;
  for (int c = 0; c < 3; ++c) up.d_color[c] = 2.0 * (r.color[c] - target[c]);
  std::vector<double> da;
  std::vector<Rgb> dc;
  composite_backward(alphas, colors, bg, up, da, dc);

  std::vector<double> grad_density(s.density.size(), 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double d_raw = da[i] * delta * (1.0 - alphas[i]) * softplus_shifted_grad(raws[i], s.bias);
    trilinear_backward(s.density, pts[i], &d_raw, grad_density);
  }
  MlpTape tape;
  mlp_forward(s.mlp, in, &tape);
  Eigen::MatrixXd d_out(3, pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int c = 0; c < 3; ++c) d_out(c, i) = dc[i][c];
  MlpGrads mlp_grads = MlpGrads::zeros_like(s.mlp);
  Eigen::MatrixXd d_in;
  mlp_backward(s.mlp, tape, d_out, mlp_grads, &d_in);
  std::vector<double> grad_feat(s.feat.size(), 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i)
    trilinear_backward(s.feat, pts[i], d_in.col(i).data(), grad_feat);

  std::vector<double> fd_density = testsupport::central_diff_vector(s.density.values(), loss);
  CHECK(testsupport::max_rel_error(grad_density, fd_density, 1e-7) < 1e-3);
  std::vector<double> fd_feat = testsupport::central_diff_vector(s.feat.values(), loss);
  CHECK(testsupport::max_rel_error(grad_feat, fd_feat, 1e-7) < 1e-3);
  std::vector<double> flat = flatten_mlp(s.mlp);
  auto loss_mlp = [&]() {
    unflatten_mlp(s.mlp, flat);
    return loss();
  };
  std::vector<double> fd_mlp = testsupport::central_diff_vector(flat, loss_mlp, 1e-5);
  unflatten_mlp(s.mlp, flat);
  CHECK(testsupport::max_rel_error(flatten_grads(mlp_grads), fd_mlp, 1e-7) < 1e-3);
}

TEST_CASE("scene checkpoints round trip through the container format") {
  Rng rng(12);
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "dvgo_scene_test";
  fs::create_directories(dir);

  CoarseScene cs = zero_coarse();
  for (double& v : cs.density.values()) v = rng.uniform(-1, 1);
  cs.bias.b = -7.25;
  save_checkpoint(cs, (dir / "coarse.ckpt").string());
  CHECK(peek_checkpoint_kind((dir / "coarse.ckpt").string()) == CheckpointKind::coarse);
  CoarseScene cs2 = load_coarse_checkpoint((dir / "coarse.ckpt").string());
  CHECK(cs2.bias.b == cs.bias.b);
  CHECK(cs2.step == cs.step);
  CHECK(cs2.density.values()[3] ==
        static_cast<double>(static_cast<float>(cs.density.values()[3])));

  FineScene fsc = small_fine(rng);
  for (double& v : fsc.feat.values()) v = rng.uniform(-1, 1);
  save_checkpoint(fsc, (dir / "fine.ckpt").string());
  FineScene f2 = load_fine_checkpoint((dir / "fine.ckpt").string());
  CHECK(f2.posenc_x == fsc.posenc_x);
  CHECK(f2.posenc_d == fsc.posenc_d);
  CHECK(f2.mlp.W.size() == fsc.mlp.W.size());
  CHECK(f2.mlp.W[0](0, 0) == static_cast<double>(static_cast<float>(fsc.mlp.W[0](0, 0))));
  CHECK_THROWS(load_coarse_checkpoint((dir / "fine.ckpt").string()));
  fs::remove_all(dir);
}
