#pragma once

#include <string>

#include "dvgo/activation.hpp"
#include "dvgo/grid.hpp"
#include "dvgo/mlp.hpp"
#include "dvgo/posenc.hpp"
#include "dvgo/rgb.hpp"

namespace dvgo {

/// Coarse stage: density grid plus a view-invariant color grid storing
/// logits (sigmoid applied at query time).
struct CoarseScene {
  DenseGrid density;  // C=1
  DenseGrid rgb;      // C=3
  ActivationBias bias;
  double step = 0.0;  // point sampling step size
};

void validate(const CoarseScene& scene);

/// Fine stage: density grid plus a feature grid decoded by a shallow MLP
/// conditioned on the encoded position and view direction. In the
/// diffuse-only ablation the feature grid holds 3 color logits and the MLP
/// is absent.
struct FineScene {
  DenseGrid density;  // C=1
  DenseGrid feat;     // C=feat_dim (3 logits when diffuse_only)
  MlpParams mlp;
  ActivationBias bias;
  double step = 0.0;
  int posenc_x = 5;
  int posenc_d = 4;
  bool diffuse_only = false;

  int feat_dim() const { return feat.channels(); }
  int mlp_input_dim() const { return feat_dim() + posenc_dim(posenc_x) + posenc_dim(posenc_d); }
};

void validate(const FineScene& scene);

struct SceneQuery {
  double raw_density = 0.0;
  Rgb rgb{0, 0, 0};
};

SceneQuery query_coarse(const CoarseScene& scene, Vec3 x);

/// d must be unit length.
SceneQuery query_fine(const FineScene& scene, Vec3 x, Vec3 d);

/// Builds the MLP input column [feat_interp, posenc(x), posenc(d)].
void fine_mlp_input(const FineScene& scene, Vec3 x, Vec3 d, double* out);

// Scene checkpoint container ("DVCK"): bias/step header, embedded grid
// snapshots, and for the fine stage the posenc orders plus the MLP blob
// (shapes in header, values little-endian f32).
void save_checkpoint(const CoarseScene& scene, const std::string& path);
void save_checkpoint(const FineScene& scene, const std::string& path);

enum class CheckpointKind { coarse = 0, fine = 1 };
CheckpointKind peek_checkpoint_kind(const std::string& path);
CoarseScene load_coarse_checkpoint(const std::string& path);
FineScene load_fine_checkpoint(const std::string& path);

}  // namespace dvgo
