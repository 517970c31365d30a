#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dvgo/camera.hpp"
#include "dvgo/image.hpp"

namespace dvgo {

struct PosedImage {
  Camera camera;
  Image pixels;  // background already composited, RGB in [0,1]
};

struct Dataset {
  std::vector<PosedImage> train;
  std::vector<PosedImage> test;
  double near = 2.0;
  double far = 6.0;
  bool white_bg = true;

  Rgb background() const {
    return white_bg ? Rgb{1.0, 1.0, 1.0} : Rgb{0.0, 0.0, 0.0};
  }
};

struct LoadOptions {
  bool white_bg = true;
  double default_near = 2.0;
  double default_far = 6.0;
};

/// Loads a transforms_{train,test}.json style dataset: camera_angle_x plus
/// per-frame file_path and 4x4 transform_matrix (camera-to-world). RGBA
/// images are composited onto the configured background.
Dataset load_nerf_synthetic(const std::string& root_dir, const LoadOptions& opts = {});

/// Writes transforms_train.json / transforms_test.json and the referenced
/// PNGs under root_dir. Focal lengths are stored alongside camera_angle_x at
/// full precision so poses round-trip bit-exactly.
void save_dataset(const Dataset& dataset, const std::vector<Image>& train_rgba,
                  const std::vector<Image>& test_rgba, const std::string& root_dir);

enum class SceneKind { sphere, boxes, two_tone_sphere };

SceneKind scene_kind_from_string(const std::string& name);

struct AnalyticScene {
  Dataset dataset;
  std::vector<Image> train_rgba;  // straight-alpha source images
  std::vector<Image> test_rgba;
};

/// Inward-facing hemisphere capture of an analytic primitive, rendered by
/// exact ray intersection. two_tone_sphere adds a view-dependent highlight.
AnalyticScene generate_analytic_scene(SceneKind kind, int n_train, int n_test, int image_size,
                                      std::uint64_t seed, bool white_bg = true);

/// Ground-truth shading for one ray of an analytic scene; exposed so tests
/// can cross-check stored pixels. Returns false on miss.
bool analytic_scene_hit(SceneKind kind, const Ray& ray, Rgb& color);

}  // namespace dvgo
