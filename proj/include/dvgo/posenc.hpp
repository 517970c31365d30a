#pragma once

#include <vector>

#include "dvgo/vec3.hpp"

namespace dvgo {

inline int posenc_dim(int k) { return 3 + 6 * k; }

/// Writes [v, sin(2^0 v), cos(2^0 v), ..., sin(2^(k-1) v), cos(2^(k-1) v)]
/// elementwise into out (posenc_dim(k) doubles). Frequencies double via the
/// angle-doubling identities, one sincos per coordinate.
inline void positional_encoding(Vec3 v, int k, double* out) {
  out[0] = v.x;
  out[1] = v.y;
  out[2] = v.z;
  if (k <= 0) return;
  double s[3] = {std::sin(v.x), std::sin(v.y), std::sin(v.z)};
  double c[3] = {std::cos(v.x), std::cos(v.y), std::cos(v.z)};
  double* p = out + 3;
  for (int j = 0; j < k; ++j) {
    for (int a = 0; a < 3; ++a) p[a] = s[a];
    for (int a = 0; a < 3; ++a) p[3 + a] = c[a];
    p += 6;
    if (j + 1 < k) {
      for (int a = 0; a < 3; ++a) {
        double s2 = 2.0 * s[a] * c[a];
        double c2 = c[a] * c[a] - s[a] * s[a];
        s[a] = s2;
        c[a] = c2;
      }
    }
  }
}

inline std::vector<double> positional_encoding(Vec3 v, int k) {
  std::vector<double> out(posenc_dim(k));
  positional_encoding(v, k, out.data());
  return out;
}

}  // namespace dvgo
