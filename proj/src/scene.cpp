#include "dvgo/scene.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dvgo/io_util.hpp"

namespace dvgo {

static void require_same_lattice(const DenseGrid& a, const DenseGrid& b, const char* what) {
  if (a.dims() != b.dims()) throw std::invalid_argument(std::string(what) + ": dims differ");
  for (int k = 0; k < 3; ++k)
    if (a.bbox().min[k] != b.bbox().min[k] || a.bbox().max[k] != b.bbox().max[k])
      throw std::invalid_argument(std::string(what) + ": bbox differs");
}

void validate(const CoarseScene& scene) {
  if (scene.density.channels() != 1 || scene.rgb.channels() != 3)
    throw std::invalid_argument("coarse scene needs C=1 density and C=3 rgb grids");
  require_same_lattice(scene.density, scene.rgb, "coarse scene");
  if (!(scene.step > 0)) throw std::invalid_argument("coarse scene step must be positive");
}

void validate(const FineScene& scene) {
  if (scene.density.channels() != 1) throw std::invalid_argument("fine density grid must be C=1");
  if (scene.feat.channels() < 1) throw std::invalid_argument("feature grid needs D >= 1");
  require_same_lattice(scene.density, scene.feat, "fine scene");
  if (!(scene.step > 0)) throw std::invalid_argument("fine scene step must be positive");
  if (scene.diffuse_only) {
    if (scene.feat.channels() != 3)
      throw std::invalid_argument("diffuse-only scene stores 3 color logits");
    if (!scene.mlp.W.empty()) throw std::invalid_argument("diffuse-only scene has no mlp");
    return;
  }
  validate(scene.mlp);
  if (scene.mlp.input_dim() != scene.mlp_input_dim() || scene.mlp.output_dim() != 3)
    throw std::invalid_argument("mlp shape does not match feature/posenc dims");
}

SceneQuery query_coarse(const CoarseScene& scene, Vec3 x) {
  SceneQuery q;
  q.raw_density = trilinear_sample1(scene.density, x);
  double logits[3];
  trilinear_sample(scene.rgb, x, logits);
  for (int c = 0; c < 3; ++c) q.rgb[c] = sigmoid(logits[c]);
  return q;
}

void fine_mlp_input(const FineScene& scene, Vec3 x, Vec3 d, double* out) {
  trilinear_sample(scene.feat, x, out);
  double* p = out + scene.feat_dim();
  positional_encoding(x, scene.posenc_x, p);
  p += posenc_dim(scene.posenc_x);
  positional_encoding(d, scene.posenc_d, p);
}

SceneQuery query_fine(const FineScene& scene, Vec3 x, Vec3 d) {
  SceneQuery q;
  q.raw_density = trilinear_sample1(scene.density, x);
  if (scene.diffuse_only) {
    double logits[3];
    trilinear_sample(scene.feat, x, logits);
    for (int c = 0; c < 3; ++c) q.rgb[c] = sigmoid(logits[c]);
    return q;
  }
  Eigen::MatrixXd in(scene.mlp_input_dim(), 1);
  fine_mlp_input(scene, x, d, in.col(0).data());
  Eigen::MatrixXd out = mlp_forward(scene.mlp, in, nullptr);
  for (int c = 0; c < 3; ++c) q.rgb[c] = out(c, 0);
  return q;
}

static constexpr char kCkptMagic[4] = {'D', 'V', 'C', 'K'};
static constexpr std::uint32_t kCkptVersion = 1;

static void write_header(std::ostream& os, CheckpointKind kind, double bias, double step) {
  os.write(kCkptMagic, 4);
  io::write_u32(os, kCkptVersion);
  io::write_u32(os, static_cast<std::uint32_t>(kind));
  io::write_f64(os, bias);
  io::write_f64(os, step);
}

static void read_header(std::istream& is, CheckpointKind& kind, double& bias, double& step) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw std::runtime_error("not a scene checkpoint (bad magic)");
  if (io::read_u32(is) != kCkptVersion) throw std::runtime_error("unsupported checkpoint version");
  kind = static_cast<CheckpointKind>(io::read_u32(is));
  bias = io::read_f64(is);
  step = io::read_f64(is);
}

static void write_mlp(std::ostream& os, const MlpParams& mlp) {
  io::write_u32(os, static_cast<std::uint32_t>(mlp.W.size()));
  for (std::size_t l = 0; l < mlp.W.size(); ++l) {
    io::write_u32(os, static_cast<std::uint32_t>(mlp.W[l].rows()));
    io::write_u32(os, static_cast<std::uint32_t>(mlp.W[l].cols()));
    for (Eigen::Index c = 0; c < mlp.W[l].cols(); ++c)
      for (Eigen::Index r = 0; r < mlp.W[l].rows(); ++r)
        io::write_f32(os, static_cast<float>(mlp.W[l](r, c)));
    for (Eigen::Index r = 0; r < mlp.b[l].size(); ++r)
      io::write_f32(os, static_cast<float>(mlp.b[l](r)));
  }
}

static MlpParams read_mlp(std::istream& is) {
  MlpParams mlp;
  std::uint32_t layers = io::read_u32(is);
  for (std::uint32_t l = 0; l < layers; ++l) {
    std::uint32_t rows = io::read_u32(is), cols = io::read_u32(is);
    Eigen::MatrixXd W(rows, cols);
    for (std::uint32_t c = 0; c < cols; ++c)
      for (std::uint32_t r = 0; r < rows; ++r) W(r, c) = io::read_f32(is);
    Eigen::VectorXd b(rows);
    for (std::uint32_t r = 0; r < rows; ++r) b(r) = io::read_f32(is);
    mlp.W.push_back(std::move(W));
    mlp.b.push_back(std::move(b));
  }
  return mlp;
}

void save_checkpoint(const CoarseScene& scene, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_header(os, CheckpointKind::coarse, scene.bias.b, scene.step);
  save_grid_snapshot(scene.density, os);
  save_grid_snapshot(scene.rgb, os);
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

void save_checkpoint(const FineScene& scene, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_header(os, CheckpointKind::fine, scene.bias.b, scene.step);
  io::write_u32(os, static_cast<std::uint32_t>(scene.posenc_x));
  io::write_u32(os, static_cast<std::uint32_t>(scene.posenc_d));
  io::write_u32(os, scene.diffuse_only ? 1u : 0u);
  save_grid_snapshot(scene.density, os);
  save_grid_snapshot(scene.feat, os);
  write_mlp(os, scene.mlp);
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

CheckpointKind peek_checkpoint_kind(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  CheckpointKind kind;
  double bias, step;
  read_header(is, kind, bias, step);
  return kind;
}

CoarseScene load_coarse_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  CheckpointKind kind;
  CoarseScene scene;
  read_header(is, kind, scene.bias.b, scene.step);
  if (kind != CheckpointKind::coarse) throw std::runtime_error("not a coarse checkpoint: " + path);
  scene.density = load_grid_snapshot(is);
  scene.rgb = load_grid_snapshot(is);
  validate(scene);
  return scene;
}

FineScene load_fine_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  CheckpointKind kind;
  FineScene scene;
  read_header(is, kind, scene.bias.b, scene.step);
  if (kind != CheckpointKind::fine) throw std::runtime_error("not a fine checkpoint: " + path);
  scene.posenc_x = static_cast<int>(io::read_u32(is));
  scene.posenc_d = static_cast<int>(io::read_u32(is));
  scene.diffuse_only = io::read_u32(is) != 0;
  scene.density = load_grid_snapshot(is);
  scene.feat = load_grid_snapshot(is);
  scene.mlp = read_mlp(is);
  validate(scene);
  return scene;
}

}  // namespace dvgo
