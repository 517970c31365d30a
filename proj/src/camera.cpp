#include "dvgo/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace dvgo {

Vec3 Camera::rotate(Vec3 v) const {
  return {c2w[0][0] * v.x + c2w[0][1] * v.y + c2w[0][2] * v.z,
          c2w[1][0] * v.x + c2w[1][1] * v.y + c2w[1][2] * v.z,
          c2w[2][0] * v.x + c2w[2][1] * v.y + c2w[2][2] * v.z};
}

Vec3 Camera::rotate_inv(Vec3 v) const {
  return {c2w[0][0] * v.x + c2w[1][0] * v.y + c2w[2][0] * v.z,
          c2w[0][1] * v.x + c2w[1][1] * v.y + c2w[2][1] * v.z,
          c2w[0][2] * v.x + c2w[1][2] * v.y + c2w[2][2] * v.z};
}

std::array<std::array<double, 4>, 4> Camera::identity_pose() {
  return {{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};
}

Camera Camera::look_at(Vec3 eye, Vec3 target, Vec3 up, double fx, double fy, double cx,
                       double cy, int width, int height, double near, double far) {
  Vec3 back = normalized(eye - target);  // camera +z points away from the target
  Vec3 right = normalized(cross(up, back));
  Vec3 cam_up = cross(back, right);
  Camera cam;
  cam.c2w = {{{right.x, cam_up.x, back.x, eye.x},
              {right.y, cam_up.y, back.y, eye.y},
              {right.z, cam_up.z, back.z, eye.z},
              {0, 0, 0, 1}}};
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  cam.near = near;
  cam.far = far;
  validate(cam);
  return cam;
}

void validate(const Camera& cam) {
  if (!(cam.near > 0 && cam.near < cam.far))
    throw std::invalid_argument("camera requires 0 < near < far");
  if (cam.width <= 0 || cam.height <= 0) throw std::invalid_argument("camera image size invalid");
  // rotation block must be orthonormal
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      double d = 0;
      for (int k = 0; k < 3; ++k) d += cam.c2w[k][a] * cam.c2w[k][b];
      double want = (a == b) ? 1.0 : 0.0;
      if (std::abs(d - want) > 1e-6)
        throw std::invalid_argument("camera rotation block not orthonormal");
    }
  if (cam.c2w[3][0] != 0 || cam.c2w[3][1] != 0 || cam.c2w[3][2] != 0 || cam.c2w[3][3] != 1)
    throw std::invalid_argument("camera pose last row must be 0 0 0 1");
}

Ray make_ray(const Camera& cam, int u, int v) {
  Vec3 d_cam{(u + 0.5 - cam.cx) / cam.fx, -(v + 0.5 - cam.cy) / cam.fy, -1.0};
  return {cam.position(), normalized(cam.rotate(d_cam))};
}

std::vector<Ray> make_rays(const Camera& cam, const std::vector<std::array<int, 2>>& pixels) {
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (auto [u, v] : pixels) {
    if (u < 0 || u >= cam.width || v < 0 || v >= cam.height)
      throw std::invalid_argument("pixel outside image bounds");
    rays.push_back(make_ray(cam, u, v));
  }
  return rays;
}

bool project_point(const Camera& cam, Vec3 p, double& u, double& v, double& depth) {
  Vec3 pc = cam.rotate_inv(p - cam.position());
  depth = -pc.z;
  if (depth <= 0) return false;
  u = cam.fx * (pc.x / depth) + cam.cx;
  v = cam.cy - cam.fy * (pc.y / depth);
  return true;
}

bool frustum_contains(const Camera& cam, Vec3 p) {
  double u, v, depth;
  if (!project_point(cam, p, u, v, depth)) return false;
  return depth >= cam.near && depth <= cam.far && u >= 0 && u <= cam.width && v >= 0 &&
         v <= cam.height;
}

std::array<Vec3, 8> frustum_corners(const Camera& cam) {
  std::array<Vec3, 8> out;
  int n = 0;
  for (double depth : {cam.near, cam.far})
    for (double v : {0.0, static_cast<double>(cam.height)})
      for (double u : {0.0, static_cast<double>(cam.width)}) {
        Vec3 pc{(u - cam.cx) / cam.fx * depth, -(v - cam.cy) / cam.fy * depth, -depth};
        out[n++] = cam.position() + cam.rotate(pc);
      }
  return out;
}

}  // namespace dvgo
