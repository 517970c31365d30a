#pragma once

#include <array>

namespace dvgo {

using Rgb = std::array<double, 3>;

inline Rgb operator+(Rgb a, Rgb b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Rgb operator-(Rgb a, Rgb b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Rgb operator*(double s, Rgb c) { return {s * c[0], s * c[1], s * c[2]}; }

inline double sq_dist(Rgb a, Rgb b) {
  double dr = a[0] - b[0], dg = a[1] - b[1], db = a[2] - b[2];
  return dr * dr + dg * dg + db * db;
}

}  // namespace dvgo
