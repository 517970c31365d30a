#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dvgo/compositor.hpp"
#include "dvgo/dataset.hpp"
#include "dvgo/losses.hpp"
#include "dvgo/scene.hpp"

namespace dvgo {

/// Every tunable of the two-stage pipeline with its default value.
struct TrainConfig {
  std::int64_t m_coarse = 100LL * 100 * 100;
  std::int64_t m_fine = 160LL * 160 * 160;
  double alpha_init_coarse = 1e-6;
  double alpha_init_fine = 1e-2;
  double step_ratio = 0.5;  // delta = step_ratio * voxel_size
  double tau_coarse = 1e-3;
  double tau_fine = 1e-4;
  int coarse_iters = 10000;
  int fine_iters = 20000;
  int batch_rays = 8192;
  std::vector<int> pg_ckpt = {1000, 2000, 3000};
  double lr_grid = 0.1;
  double lr_mlp = 1e-3;
  double lr_decay_period = 20000.0;
  LossWeights loss_coarse = LossWeights::coarse_defaults();
  LossWeights loss_fine = LossWeights::fine_defaults();
  std::uint64_t seed = 0;
  bool white_bg = true;

  int mlp_hidden = 128;
  int mlp_layers = 2;
  int feat_dim = 12;
  int posenc_x = 5;
  int posenc_d = 4;

  unsigned threads = 0;  // 0 = hardware concurrency

  // Ablation / engineering switches.
  bool low_density_init = true;   // false: bias = 0 in both stages
  bool view_count_lr = true;
  bool diffuse_only = false;      // fine stage color from a logit grid, no MLP
  bool enable_skipping = true;    // point-level tau tests; bbox discovery stays on
  double term_transmittance = 1e-6;  // stop marching below this T; 0 disables
};

void validate(const TrainConfig& cfg);

struct TraceRow {
  int iter = 0;  // 1-based
  double total = 0, photo = 0, pt_rgb = 0, bg_entropy = 0;
  double lr_factor = 1;
  double seconds = 0;
};

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);
std::vector<TraceRow> read_trace_csv(const std::string& path);

/// Axis-aligned box over all 8 frustum corners of every camera.
Bbox3 coarse_bbox(const std::vector<Camera>& cameras);

/// Known-free-space test against the frozen coarse density grid: a point is
/// free when its post-activated alpha (at the coarse sampling step) falls
/// below tau. Holds a conservative per-cell alpha upper bound so whole cells
/// of free space are rejected without sampling.
class FreeSpaceMask {
 public:
  FreeSpaceMask(const CoarseScene& coarse, double tau);

  double tau() const { return tau_; }
  const CoarseScene& coarse() const { return *coarse_; }

  double alpha(Vec3 p) const;
  bool occupied(Vec3 p) const;
  /// False only when no point of the surrounding cell can reach tau.
  bool occupied_possible(Vec3 p) const;

 private:
  const CoarseScene* coarse_;
  double tau_;
  std::array<int, 3> cells_;
  std::vector<double> cell_alpha_ub_;
};

/// Bbox of the occupied probes of a dense lattice (2x coarse resolution),
/// padded by one coarse cell; falls back to the coarse bbox when nothing is
/// occupied.
Bbox3 fine_bbox(const FreeSpaceMask& mask);

struct CoarseResult {
  CoarseScene scene;
  std::vector<TraceRow> trace;
};

CoarseResult train_coarse(const Dataset& dataset, const TrainConfig& cfg);

struct FineResult {
  FineScene scene;
  std::vector<TraceRow> trace;
  Bbox3 bbox;
};

FineResult train_fine(const Dataset& dataset, const CoarseScene& coarse,
                      const TrainConfig& cfg);

/// Resamples the fine grids for a new voxel budget over the same bbox
/// (progressive scaling step). Exposed for tests.
void scale_fine_grids(FineScene& scene, std::int64_t new_budget);

struct RenderOptions {
  const FreeSpaceMask* mask = nullptr;  // known-free-space skipping
  double tau_fine = 0.0;                // fine-alpha skip threshold; 0 disables
  double term_transmittance = 1e-6;
  unsigned threads = 1;
};

Image render_view(const CoarseScene& scene, const Camera& camera, Rgb bg,
                  const RenderOptions& opts = {});
Image render_view(const FineScene& scene, const Camera& camera, Rgb bg,
                  const RenderOptions& opts = {});

}  // namespace dvgo
