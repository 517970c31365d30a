#include "dvgo/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dvgo/io_util.hpp"

namespace dvgo {

DenseGrid::DenseGrid(int channels, std::array<int, 3> dims, Bbox3 bbox)
    : channels_(channels), dims_(dims), bbox_(bbox) {
  if (channels < 1) throw std::invalid_argument("grid needs at least one channel");
  for (int k = 0; k < 3; ++k)
    if (dims[k] < 2) throw std::invalid_argument("grid dims must be >= 2 per axis");
  validate(bbox);
  values_.assign(static_cast<std::size_t>(channels) * points(), 0.0);
}

void DenseGrid::set_lr_scale(std::vector<double> scale) {
  if (scale.size() != points())
    throw std::invalid_argument("lr_scale needs one entry per grid point");
  for (double s : scale)
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("lr_scale entries must be in [0,1]");
  lr_scale_ = std::move(scale);
}

Vec3 DenseGrid::point_position(int ix, int iy, int iz) const {
  Vec3 L = bbox_.extent();
  return {bbox_.min.x + L.x * ix / (dims_[0] - 1),
          bbox_.min.y + L.y * iy / (dims_[1] - 1),
          bbox_.min.z + L.z * iz / (dims_[2] - 1)};
}

Vec3 DenseGrid::world_to_grid(Vec3 p) const {
  Vec3 L = bbox_.extent();
  return {(p.x - bbox_.min.x) / L.x * (dims_[0] - 1),
          (p.y - bbox_.min.y) / L.y * (dims_[1] - 1),
          (p.z - bbox_.min.z) / L.z * (dims_[2] - 1)};
}

TrilinearStencil DenseGrid::stencil(Vec3 p) const {
  Vec3 g = world_to_grid(p);
  int i[3];
  double f[3];
  for (int k = 0; k < 3; ++k) {
    double gk = std::clamp(g[k], 0.0, static_cast<double>(dims_[k] - 1));
    int ik = static_cast<int>(gk);
    if (ik > dims_[k] - 2) ik = dims_[k] - 2;
    i[k] = ik;
    f[k] = gk - ik;
  }
  const std::size_t sx = static_cast<std::size_t>(dims_[1]) * dims_[2];
  const std::size_t sy = dims_[2];
  const std::size_t base = i[0] * sx + i[1] * sy + i[2];
  const double fx = f[0], fy = f[1], fz = f[2];
  TrilinearStencil st;
  st.idx = {base,
            base + 1,
            base + sy,
            base + sy + 1,
            base + sx,
            base + sx + 1,
            base + sx + sy,
            base + sx + sy + 1};
  st.w = {(1 - fx) * (1 - fy) * (1 - fz), (1 - fx) * (1 - fy) * fz,
          (1 - fx) * fy * (1 - fz),       (1 - fx) * fy * fz,
          fx * (1 - fy) * (1 - fz),       fx * (1 - fy) * fz,
          fx * fy * (1 - fz),             fx * fy * fz};
  return st;
}

void DenseGrid::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

double voxel_size_for_budget(const Bbox3& bbox, VoxelBudget budget) {
  validate(bbox);
  if (budget.count < 8) throw std::invalid_argument("voxel budget must be >= 8");
  return std::cbrt(bbox.volume() / static_cast<double>(budget.count));
}

std::array<int, 3> dims_for_voxel_size(const Bbox3& bbox, double voxel_size) {
  Vec3 L = bbox.extent();
  std::array<int, 3> dims;
  for (int k = 0; k < 3; ++k) {
    // 1e-9 slack so exact ratios survive the cbrt/divide round trip
    int n = static_cast<int>(std::floor(L[k] / voxel_size + 1e-9));
    dims[k] = std::max(2, n);
  }
  return dims;
}

DenseGrid allocate(const Bbox3& bbox, VoxelBudget budget, int channels) {
  double s = voxel_size_for_budget(bbox, budget);
  return DenseGrid(channels, dims_for_voxel_size(bbox, s), bbox);
}

void trilinear_sample(const DenseGrid& grid, Vec3 p, double* out) {
  TrilinearStencil st = grid.stencil(p);
  const double* v = grid.values().data();
  const std::size_t cs = grid.channel_stride();
  for (int c = 0; c < grid.channels(); ++c) {
    const double* vc = v + c * cs;
    double acc = 0.0;
    for (int j = 0; j < 8; ++j) acc += st.w[j] * vc[st.idx[j]];
    out[c] = acc;
  }
}

double trilinear_sample1(const DenseGrid& grid, Vec3 p) {
  double out;
  trilinear_sample(grid, p, &out);
  return out;
}

void trilinear_backward(const DenseGrid& grid, Vec3 p, const double* upstream,
                        std::vector<double>& grad_out) {
  if (grad_out.size() != grid.size())
    throw std::invalid_argument("gradient buffer shape mismatch");
  TrilinearStencil st = grid.stencil(p);
  const std::size_t cs = grid.channel_stride();
  for (int c = 0; c < grid.channels(); ++c) {
    double* gc = grad_out.data() + c * cs;
    const double u = upstream[c];
    for (int j = 0; j < 8; ++j) gc[st.idx[j]] += u * st.w[j];
  }
}

void nearest_sample(const DenseGrid& grid, Vec3 p, double* out) {
  Vec3 g = grid.world_to_grid(p);
  std::size_t i[3];
  for (int k = 0; k < 3; ++k) {
    // round half toward +inf
    long n = static_cast<long>(std::floor(g[k] + 0.5));
    i[k] = static_cast<std::size_t>(std::clamp<long>(n, 0, grid.dims()[k] - 1));
  }
  const std::size_t cs = grid.channel_stride();
  std::size_t base = (i[0] * grid.dims()[1] + i[1]) * grid.dims()[2] + i[2];
  for (int c = 0; c < grid.channels(); ++c) out[c] = grid.values()[c * cs + base];
}

DenseGrid upsample(const DenseGrid& grid, std::array<int, 3> new_dims) {
  for (int k = 0; k < 3; ++k)
    if (new_dims[k] < grid.dims()[k])
      throw std::invalid_argument("upsample cannot shrink the grid");
  DenseGrid out(grid.channels(), new_dims, grid.bbox());
  std::vector<double> tmp(grid.channels());
  for (int ix = 0; ix < new_dims[0]; ++ix)
    for (int iy = 0; iy < new_dims[1]; ++iy)
      for (int iz = 0; iz < new_dims[2]; ++iz) {
        trilinear_sample(grid, out.point_position(ix, iy, iz), tmp.data());
        for (int c = 0; c < grid.channels(); ++c) out.at(c, ix, iy, iz) = tmp[c];
      }
  return out;
}

static constexpr char kGridMagic[4] = {'D', 'V', 'G', 'R'};
static constexpr std::uint32_t kGridVersion = 1;

void save_grid_snapshot(const DenseGrid& grid, std::ostream& os) {
  os.write(kGridMagic, 4);
  io::write_u32(os, kGridVersion);
  io::write_u32(os, static_cast<std::uint32_t>(grid.channels()));
  for (int k = 0; k < 3; ++k) io::write_u32(os, static_cast<std::uint32_t>(grid.dims()[k]));
  for (int k = 0; k < 3; ++k) io::write_f64(os, grid.bbox().min[k]);
  for (int k = 0; k < 3; ++k) io::write_f64(os, grid.bbox().max[k]);
  for (double v : grid.values()) io::write_f32(os, static_cast<float>(v));
  if (!os) throw std::runtime_error("failed writing grid snapshot");
}

void save_grid_snapshot(const DenseGrid& grid, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  save_grid_snapshot(grid, f);
}

DenseGrid load_grid_snapshot(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kGridMagic, 4) != 0)
    throw std::runtime_error("not a grid snapshot (bad magic)");
  std::uint32_t version = io::read_u32(is);
  if (version != kGridVersion) throw std::runtime_error("unsupported grid snapshot version");
  int channels = static_cast<int>(io::read_u32(is));
  std::array<int, 3> dims;
  for (int k = 0; k < 3; ++k) dims[k] = static_cast<int>(io::read_u32(is));
  Bbox3 bbox;
  for (int k = 0; k < 3; ++k) bbox.min[k] = io::read_f64(is);
  for (int k = 0; k < 3; ++k) bbox.max[k] = io::read_f64(is);
  DenseGrid grid(channels, dims, bbox);
  for (double& v : grid.values()) v = io::read_f32(is);
  if (!is) throw std::runtime_error("truncated grid snapshot");
  return grid;
}

DenseGrid load_grid_snapshot(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  return load_grid_snapshot(f);
}

}  // namespace dvgo
