#pragma once

#include <stdexcept>

#include "dvgo/vec3.hpp"

namespace dvgo {

/// Axis-aligned box in world space. min[k] < max[k] on every axis.
struct Bbox3 {
  Vec3 min;
  Vec3 max;

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  double volume() const {
    Vec3 e = extent();
    return e.x * e.y * e.z;
  }

  bool contains(Vec3 p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
           p.z >= min.z && p.z <= max.z;
  }

  void expand(Vec3 p) {
    for (int k = 0; k < 3; ++k) {
      if (p[k] < min[k]) min[k] = p[k];
      if (p[k] > max[k]) max[k] = p[k];
    }
  }

  Bbox3 padded(double pad) const { return {min - Vec3{pad, pad, pad}, max + Vec3{pad, pad, pad}}; }
};

inline void validate(const Bbox3& b) {
  if (!all_finite(b.min) || !all_finite(b.max))
    throw std::invalid_argument("bbox coordinates must be finite");
  for (int k = 0; k < 3; ++k)
    if (!(b.min[k] < b.max[k]))
      throw std::invalid_argument("bbox degenerate: min must be < max on every axis");
}

/// Slab intersection of the segment [t0, t1] of origin + t*dir with the box.
/// Returns false when the segment misses; rays tangent to a face count as hits.
inline bool intersect_segment(const Bbox3& box, Vec3 origin, Vec3 dir, double& t0, double& t1) {
  double lo = t0, hi = t1;
  for (int k = 0; k < 3; ++k) {
    double o = origin[k], d = dir[k];
    if (d == 0.0) {
      if (o < box.min[k] || o > box.max[k]) return false;
      continue;
    }
    double ta = (box.min[k] - o) / d;
    double tb = (box.max[k] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    if (ta > lo) lo = ta;
    if (tb < hi) hi = tb;
    if (lo > hi) return false;
  }
  t0 = lo;
  t1 = hi;
  return true;
}

}  // namespace dvgo
