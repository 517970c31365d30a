#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dvgo/bbox.hpp"
#include "dvgo/vec3.hpp"

namespace dvgo {

/// Expected total voxel count for grid allocation.
struct VoxelBudget {
  std::int64_t count = 8;
};

/// The 8 cell corners touched by one trilinear query, with their weights.
/// Indices address the spatial lattice (channel 0); channel c adds
/// c * stride_channel.
struct TrilinearStencil {
  std::array<std::size_t, 8> idx;
  std::array<double, 8> w;
};

/// Dense C-channel voxel grid aligned to a world-space box.
///
/// Grid points sit at cell corners spanning the bbox inclusively: point
/// (i,j,k) lives at min + (i/(Nx-1))*Lx per axis. Storage is channel-major,
/// then x, y, z (z fastest), the same layout the snapshot file uses.
class DenseGrid {
 public:
  DenseGrid() = default;
  DenseGrid(int channels, std::array<int, 3> dims, Bbox3 bbox);

  int channels() const { return channels_; }
  const std::array<int, 3>& dims() const { return dims_; }
  const Bbox3& bbox() const { return bbox_; }

  std::size_t points() const {
    return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  }
  std::size_t size() const { return values_.size(); }
  std::size_t channel_stride() const { return points(); }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& at(int c, int ix, int iy, int iz) { return values_[flat(c, ix, iy, iz)]; }
  double at(int c, int ix, int iy, int iz) const { return values_[flat(c, ix, iy, iz)]; }
  std::size_t flat(int c, int ix, int iy, int iz) const {
    return ((static_cast<std::size_t>(c) * dims_[0] + ix) * dims_[1] + iy) * dims_[2] + iz;
  }

  /// Per-grid-point learning-rate scale in [0,1]; empty when unused.
  const std::vector<double>& lr_scale() const { return lr_scale_; }
  void set_lr_scale(std::vector<double> scale);
  void clear_lr_scale() { lr_scale_.clear(); }

  /// World position of grid point (ix, iy, iz).
  Vec3 point_position(int ix, int iy, int iz) const;

  /// World -> continuous grid coordinates (no clamping).
  Vec3 world_to_grid(Vec3 p) const;

  /// Stencil for a border-clamped trilinear query at world point p.
  TrilinearStencil stencil(Vec3 p) const;

  void fill(double v);

 private:
  int channels_ = 0;
  std::array<int, 3> dims_ = {0, 0, 0};
  Bbox3 bbox_;
  std::vector<double> values_;
  std::vector<double> lr_scale_;
};

/// Nominal voxel size for a budget of M voxels: cbrt(Lx*Ly*Lz / M).
double voxel_size_for_budget(const Bbox3& bbox, VoxelBudget budget);

/// Grid dimensions floor(L_k / s), clamped up to 2 per axis.
std::array<int, 3> dims_for_voxel_size(const Bbox3& bbox, double voxel_size);

/// Allocates a zero-initialized grid sized from the voxel budget.
DenseGrid allocate(const Bbox3& bbox, VoxelBudget budget, int channels);

/// Border-clamped trilinear interpolation, one output per channel.
void trilinear_sample(const DenseGrid& grid, Vec3 p, double* out);

/// Single-channel convenience overload.
double trilinear_sample1(const DenseGrid& grid, Vec3 p);

/// Accumulates upstream[c] * (trilinear weight) into the 8 corner slots of
/// grad_out, which must be shaped like grid.values().
void trilinear_backward(const DenseGrid& grid, Vec3 p, const double* upstream,
                        std::vector<double>& grad_out);

/// Value of the nearest grid point; ties round half toward +inf per axis.
void nearest_sample(const DenseGrid& grid, Vec3 p, double* out);

/// Trilinear resample onto a finer lattice over the same bbox.
DenseGrid upsample(const DenseGrid& grid, std::array<int, 3> new_dims);

/// Grid snapshot file ("DVGR"): header + values as little-endian f32.
/// lr_scale is not stored.
void save_grid_snapshot(const DenseGrid& grid, std::ostream& os);
void save_grid_snapshot(const DenseGrid& grid, const std::string& path);
DenseGrid load_grid_snapshot(std::istream& is);
DenseGrid load_grid_snapshot(const std::string& path);

}  // namespace dvgo
