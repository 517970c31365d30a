#include "dvgo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "dvgo/log.hpp"
#include "dvgo/rng.hpp"

namespace dvgo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Camera camera_from_frame(const json& frame, double camera_angle_x, double fl_x, double fl_y,
                         int width, int height, double near, double far) {
  Camera cam;
  const auto& m = frame.at("transform_matrix");
  if (!m.is_array() || m.size() != 4)
    throw std::runtime_error("transform_matrix must be a 4x4 array");
  for (int r = 0; r < 4; ++r) {
    if (!m[r].is_array() || m[r].size() != 4)
      throw std::runtime_error("transform_matrix must be a 4x4 array");
    for (int c = 0; c < 4; ++c) cam.c2w[r][c] = m[r][c].get<double>();
  }
  cam.width = width;
  cam.height = height;
  cam.fx = fl_x > 0 ? fl_x : 0.5 * width / std::tan(camera_angle_x / 2.0);
  cam.fy = fl_y > 0 ? fl_y : cam.fx;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.near = near;
  cam.far = far;
  try {
    validate(cam);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("malformed camera pose: ") + e.what());
  }
  return cam;
}

Image composite_background(const Image& src, Rgb bg) {
  Image out(src.width, src.height, 3);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      double a = src.channels == 4 ? src.at(x, y, 3) : 1.0;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = a * src.at(x, y, c) + (1.0 - a) * bg[c];
    }
  return out;
}

std::vector<PosedImage> load_split(const fs::path& root, const std::string& split,
                                   const LoadOptions& opts, Rgb bg) {
  fs::path tf = root / ("transforms_" + split + ".json");
  std::ifstream f(tf);
  if (!f) throw std::runtime_error("missing transforms file: " + tf.string());
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::exception& e) {
    throw std::runtime_error("cannot parse " + tf.string() + ": " + e.what());
  }

  double angle = doc.value("camera_angle_x", 0.0);
  double fl_x = doc.value("fl_x", 0.0);
  double fl_y = doc.value("fl_y", 0.0);
  if (angle <= 0.0 && fl_x <= 0.0)
    throw std::runtime_error(tf.string() + " lacks camera_angle_x / fl_x");
  double near = doc.value("near", opts.default_near);
  double far = doc.value("far", opts.default_far);

  std::vector<PosedImage> out;
  int expect_w = -1, expect_h = -1;
  for (const auto& frame : doc.at("frames")) {
    std::string rel = frame.at("file_path").get<std::string>();
    fs::path img_path = root / rel;
    if (!img_path.has_extension()) img_path += ".png";
    Image raw = read_png(img_path.string());
    if (expect_w < 0) {
      expect_w = raw.width;
      expect_h = raw.height;
    } else if (raw.width != expect_w || raw.height != expect_h) {
      throw std::runtime_error("image dimensions inconsistent within split: " +
                               img_path.string());
    }
    PosedImage pi;
    pi.camera = camera_from_frame(frame, angle, fl_x, fl_y, raw.width, raw.height, near, far);
    pi.pixels = composite_background(raw, bg);
    out.push_back(std::move(pi));
  }
  return out;
}

json frame_json(const Camera& cam, const std::string& file_path) {
  json frame;
  frame["file_path"] = file_path;
  frame["transform_matrix"] = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) row.push_back(cam.c2w[r][c]);
    frame["transform_matrix"].push_back(row);
  }
  return frame;
}

void save_split(const fs::path& root, const std::string& split,
                const std::vector<PosedImage>& posed, const std::vector<Image>& rgba,
                double near, double far) {
  if (posed.empty()) return;
  fs::create_directories(root / split);
  json doc;
  const Camera& c0 = posed.front().camera;
  doc["camera_angle_x"] = 2.0 * std::atan(0.5 * c0.width / c0.fx);
  doc["fl_x"] = c0.fx;
  doc["fl_y"] = c0.fy;
  doc["near"] = near;
  doc["far"] = far;
  doc["frames"] = json::array();
  for (std::size_t i = 0; i < posed.size(); ++i) {
    std::string rel = split + "/r_" + std::to_string(i);
    doc["frames"].push_back(frame_json(posed[i].camera, rel));
    const Image& img = (i < rgba.size()) ? rgba[i] : posed[i].pixels;
    write_png(img, (root / (rel + ".png")).string());
  }
  std::ofstream f(root / ("transforms_" + split + ".json"));
  if (!f) throw std::runtime_error("cannot write transforms under " + root.string());
  f << doc.dump(1) << "\n";
}

}  // namespace

Dataset load_nerf_synthetic(const std::string& root_dir, const LoadOptions& opts) {
  Dataset ds;
  ds.white_bg = opts.white_bg;
  Rgb bg = ds.background();
  ds.train = load_split(root_dir, "train", opts, bg);
  ds.test = load_split(root_dir, "test", opts, bg);
  if (ds.train.empty()) throw std::runtime_error("dataset has an empty train split");
  ds.near = ds.train.front().camera.near;
  ds.far = ds.train.front().camera.far;
  DVGO_LOG_INFO("loaded dataset: %zu train / %zu test views (%dx%d)", ds.train.size(),
                ds.test.size(), ds.train.front().camera.width,
                ds.train.front().camera.height);
  return ds;
}

void save_dataset(const Dataset& dataset, const std::vector<Image>& train_rgba,
                  const std::vector<Image>& test_rgba, const std::string& root_dir) {
  fs::create_directories(root_dir);
  save_split(root_dir, "train", dataset.train, train_rgba, dataset.near, dataset.far);
  save_split(root_dir, "test", dataset.test, test_rgba, dataset.near, dataset.far);
}

SceneKind scene_kind_from_string(const std::string& name) {
  if (name == "sphere") return SceneKind::sphere;
  if (name == "boxes") return SceneKind::boxes;
  if (name == "two_tone_sphere") return SceneKind::two_tone_sphere;
  throw std::invalid_argument("unknown scene kind: " + name);
}

namespace {

constexpr double kSphereRadius = 1.0;
const Vec3 kLightDir = normalized(Vec3{0.4, 0.3, 0.85});

bool hit_sphere(const Ray& ray, double radius, double& t) {
  // |o + t d|^2 = r^2 with unit d
  double b = dot(ray.origin, ray.dir);
  double c = dot(ray.origin, ray.origin) - radius * radius;
  double disc = b * b - c;
  if (disc < 0) return false;
  t = -b - std::sqrt(disc);
  return t > 0;
}

Rgb shade_sphere(SceneKind kind, const Ray& ray, double t) {
  Vec3 p = ray.origin + t * ray.dir;
  Vec3 n = normalized(p);
  Rgb albedo{0.80, 0.36, 0.25};
  if (kind == SceneKind::two_tone_sphere)
    albedo = n.z >= 0.0 ? Rgb{0.85, 0.30, 0.20} : Rgb{0.15, 0.35, 0.85};
  double diff = std::max(0.0, dot(n, kLightDir));
  Rgb c = (0.35 + 0.65 * diff) * albedo;
  if (kind == SceneKind::two_tone_sphere) {
    // Blinn-Phong lobe; this is the view-dependent part of the scene
    Vec3 to_eye = -1.0 * ray.dir;
    Vec3 h = normalized(kLightDir + to_eye);
    double spec = 0.85 * std::pow(std::max(0.0, dot(n, h)), 12.0);
    for (int k = 0; k < 3; ++k) c[k] += spec;
  }
  for (int k = 0; k < 3; ++k) c[k] = std::clamp(c[k], 0.0, 1.0);
  return c;
}

struct Box {
  Bbox3 bounds;
  Rgb albedo;
};

const Box kBoxes[2] = {
    {{{-0.9, -0.9, -0.55}, {0.1, 0.1, 0.45}}, {0.85, 0.25, 0.2}},
    {{{-0.1, -0.1, -0.75}, {0.85, 0.85, 0.15}}, {0.2, 0.4, 0.85}},
};

bool hit_boxes(const Ray& ray, double& t_best, Vec3& n_best, Rgb& albedo) {
  bool hit = false;
  t_best = 1e30;
  for (const Box& box : kBoxes) {
    double t0 = 1e-6, t1 = 1e30;
    if (!intersect_segment(box.bounds, ray.origin, ray.dir, t0, t1)) continue;
    if (t0 >= t_best || t0 <= 0) continue;
    t_best = t0;
    hit = true;
    albedo = box.albedo;
    Vec3 p = ray.origin + t0 * ray.dir;
    // face normal: the axis where p touches a slab
    n_best = {0, 0, 0};
    double best_gap = 1e30;
    for (int k = 0; k < 3; ++k) {
      double glo = std::abs(p[k] - box.bounds.min[k]);
      double ghi = std::abs(p[k] - box.bounds.max[k]);
      if (glo < best_gap) {
        best_gap = glo;
        n_best = {0, 0, 0};
        n_best[k] = -1;
      }
      if (ghi < best_gap) {
        best_gap = ghi;
        n_best = {0, 0, 0};
        n_best[k] = 1;
      }
    }
  }
  return hit;
}

}  // namespace

bool analytic_scene_hit(SceneKind kind, const Ray& ray, Rgb& color) {
  if (kind == SceneKind::boxes) {
    double t;
    Vec3 n;
    Rgb albedo;
    if (!hit_boxes(ray, t, n, albedo)) return false;
    double diff = std::max(0.0, dot(n, kLightDir));
    color = (0.3 + 0.7 * diff) * albedo;
    for (int k = 0; k < 3; ++k) color[k] = std::clamp(color[k], 0.0, 1.0);
    return true;
  }
  double t;
  if (!hit_sphere(ray, kSphereRadius, t)) return false;
  color = shade_sphere(kind, ray, t);
  return true;
}

namespace {

Image render_analytic_rgba(SceneKind kind, const Camera& cam) {
  Image img(cam.width, cam.height, 4);
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u) {
      Ray ray = make_ray(cam, u, v);
      Rgb c;
      if (analytic_scene_hit(kind, ray, c)) {
        img.at(u, v, 0) = c[0];
        img.at(u, v, 1) = c[1];
        img.at(u, v, 2) = c[2];
        img.at(u, v, 3) = 1.0;
      }
    }
  return img;
}

std::vector<Camera> hemisphere_cameras(int count, int image_size, double near, double far,
                                       Rng& rng) {
  constexpr double kRadius = 4.0;
  constexpr double kAngleX = 0.6911112070083618;  // ~39.6 deg horizontal fov
  double fx = 0.5 * image_size / std::tan(kAngleX / 2.0);
  std::vector<Camera> cams;
  const double golden = 2.399963229728653;  // golden angle, radians
  double phase = rng.uniform(0.0, 2.0 * M_PI);
  for (int i = 0; i < count; ++i) {
    double az = phase + golden * i;
    double el = (0.15 + 0.65 * rng.uniform()) * (M_PI / 2.0);  // keep above the horizon
    Vec3 eye{kRadius * std::cos(el) * std::cos(az), kRadius * std::cos(el) * std::sin(az),
             kRadius * std::sin(el)};
    cams.push_back(Camera::look_at(eye, Vec3{0, 0, 0}, Vec3{0, 0, 1}, fx, fx, image_size / 2.0,
                                   image_size / 2.0, image_size, image_size, near, far));
  }
  return cams;
}

}  // namespace

AnalyticScene generate_analytic_scene(SceneKind kind, int n_train, int n_test, int image_size,
                                      std::uint64_t seed, bool white_bg) {
  if (n_train < 1 || n_test < 1) throw std::invalid_argument("need at least one view per split");
  if (image_size < 16) throw std::invalid_argument("image_size too small");
  AnalyticScene scene;
  scene.dataset.white_bg = white_bg;
  scene.dataset.near = 2.0;
  scene.dataset.far = 6.0;
  Rgb bg = scene.dataset.background();

  Rng rng(seed);
  auto cams = hemisphere_cameras(n_train + n_test, image_size, scene.dataset.near,
                                 scene.dataset.far, rng);
  for (int i = 0; i < n_train + n_test; ++i) {
    Image rgba = render_analytic_rgba(kind, cams[i]);
    PosedImage pi;
    pi.camera = cams[i];
    pi.pixels = composite_background(rgba, bg);
    if (i < n_train) {
      scene.dataset.train.push_back(std::move(pi));
      scene.train_rgba.push_back(std::move(rgba));
    } else {
      scene.dataset.test.push_back(std::move(pi));
      scene.test_rgba.push_back(std::move(rgba));
    }
  }
  return scene;
}

}  // namespace dvgo
