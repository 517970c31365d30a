#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dvgo/camera.hpp"

namespace dvgo {

/// Ordered query points along one ray.
struct SampleBatch {
  std::vector<Vec3> points;
  std::vector<double> deltas;      // per-point segment length, all > 0
  std::vector<std::uint8_t> alive; // survives free-space skipping

  std::size_t size() const { return points.size(); }
};

/// Equidistant samples x_i = (o + near*d) + i*step*d for i = 0..ceil((far-near)/step).
inline SampleBatch sample_along_ray(const Ray& ray, double near, double far, double step) {
  if (!(near > 0.0 || near == 0.0) || !(near < far) || !(step > 0.0))
    throw std::invalid_argument("sample_along_ray requires 0 <= near < far and step > 0");
  // 1e-9 slack keeps exact multiples from picking up a spurious extra point
  auto n_steps = static_cast<std::size_t>(std::ceil((far - near) / step - 1e-9));
  if (n_steps < 1) n_steps = 1;
  SampleBatch batch;
  batch.points.reserve(n_steps + 1);
  Vec3 x0 = ray.origin + near * ray.dir;
  for (std::size_t i = 0; i <= n_steps; ++i) batch.points.push_back(x0 + (i * step) * ray.dir);
  batch.deltas.assign(n_steps + 1, step);
  batch.alive.assign(n_steps + 1, 1);
  return batch;
}

/// Rigidly shifts every point by u*step along the unit ray direction.
inline void jitter_samples(SampleBatch& batch, const Ray& ray, double step, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("jitter fraction must be in [0,1]");
  Vec3 shift = (u * step) * ray.dir;
  for (Vec3& p : batch.points) p += shift;
}

}  // namespace dvgo
