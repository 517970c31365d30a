#pragma once

#include <array>
#include <vector>

#include "dvgo/bbox.hpp"
#include "dvgo/vec3.hpp"

namespace dvgo {

/// Pinhole camera, NeRF-synthetic conventions: camera space has +x right,
/// +y up, and the camera looks down -z. c2w is row-major camera-to-world.
struct Camera {
  std::array<std::array<double, 4>, 4> c2w;
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
  double near = 0, far = 0;

  Vec3 position() const { return {c2w[0][3], c2w[1][3], c2w[2][3]}; }
  Vec3 rotate(Vec3 v) const;     // rotation block only
  Vec3 rotate_inv(Vec3 v) const; // transpose of the rotation block

  static std::array<std::array<double, 4>, 4> identity_pose();

  /// Pose at `eye` looking toward `target` with the given up hint.
  static Camera look_at(Vec3 eye, Vec3 target, Vec3 up, double fx, double fy, double cx,
                        double cy, int width, int height, double near, double far);
};

/// Throws when the rotation block is not orthonormal (1e-6) or near/far are
/// out of order.
void validate(const Camera& cam);

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit length
};

/// Rays through the centers of the given pixels. Pixel (u,v) maps to the
/// camera-space direction ((u+.5-cx)/fx, -(v+.5-cy)/fy, -1) before rotation.
std::vector<Ray> make_rays(const Camera& cam, const std::vector<std::array<int, 2>>& pixels);

/// Single-pixel convenience used by the renderers.
Ray make_ray(const Camera& cam, int u, int v);

/// Continuous pixel coordinates and camera depth of a world point; used by
/// frustum visibility tests. Returns false when the point is behind the
/// camera.
bool project_point(const Camera& cam, Vec3 p, double& u, double& v, double& depth);

/// True when p lies inside the camera frustum between the near and far plane.
bool frustum_contains(const Camera& cam, Vec3 p);

/// The 8 world-space frustum corner points (near and far plane).
std::array<Vec3, 8> frustum_corners(const Camera& cam);

}  // namespace dvgo
