#include "dvgo/sharp_surface.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dvgo {

void validate(const SharpSurfaceSpec1D& spec) {
  if (!(spec.eps > 0.0 && spec.eps < 1.0)) throw std::invalid_argument("eps must lie in (0,1)");
  if (!(spec.delta_tol > 0.0)) throw std::invalid_argument("delta_tol must be positive");
  if (!(spec.delta_render > 0.0)) throw std::invalid_argument("delta_render must be positive");
  // interior boundaries need the whole tolerance band to reach the cell;
  // equality is allowed (the reference tables use delta_tol = c)
  if (spec.c > 0.0 && spec.c < 1.0 &&
      spec.delta_tol > std::min(spec.c, 1.0 - spec.c) + 1e-12)
    throw std::invalid_argument("delta_tol must be <= min(c, 1-c) for an interior boundary");
}

double sharp_alpha(double x, double a, double b, double delta_render) {
  return alpha_from_sigma(softplus_shifted(a * (1.0 - x) + b * x, {0.0}), delta_render);
}

Solved1D solve_1d(const SharpSurfaceSpec1D& spec) {
  validate(spec);
  if (spec.c == 0.0) throw std::invalid_argument("c = 0 is singular (b divides by c)");
  const double c = spec.c, dt = spec.delta_tol, d = spec.delta_render;
  const double log2d = std::log(std::pow(2.0, 1.0 / d) - 1.0);
  Solved1D out;
  if (d < 1.0) {
    double log_eps = std::log(std::pow(spec.eps, -1.0 / d) - 1.0);
    out.a = log2d * (c + dt) / dt - log_eps * (c / dt);
  } else {
    double log_1meps = std::log(std::pow(1.0 - spec.eps, -1.0 / d) - 1.0);
    out.a = log_1meps * (c / dt) - log2d * (c - dt) / dt;
  }
  out.b = out.a * (c - 1.0) / c + log2d / c;
  return out;
}

Verify1DReport verify_1d(double a, double b, const SharpSurfaceSpec1D& spec, int n_probe,
                         bool occupied_right) {
  validate(spec);
  if (n_probe < 3) throw std::invalid_argument("verify_1d needs at least 3 probes");
  Verify1DReport rep;
  rep.probes.reserve(n_probe);
  const double d = spec.delta_render;

  double prev = sharp_alpha(0.0, a, b, d);
  bool monotone = true;
  const bool increasing = occupied_right;
  for (int i = 0; i < n_probe; ++i) {
    double x = static_cast<double>(i) / (n_probe - 1);
    double s = sharp_alpha(x, a, b, d);
    bool right_of_c = x > spec.c;
    double t = (right_of_c == occupied_right) ? 1.0 : 0.0;
    rep.probes.push_back({x, s, t});
    if (increasing ? s < prev - 1e-12 : s > prev + 1e-12) monotone = false;
    prev = s;
    double err = std::abs(s - t);
    if (x <= spec.c - spec.delta_tol) rep.max_err_below = std::max(rep.max_err_below, err);
    if (x >= spec.c + spec.delta_tol) rep.max_err_above = std::max(rep.max_err_above, err);
  }
  rep.monotone = monotone;
  // a sits exactly on the bound, so |S - T| attains eps at the band edge;
  // leave room for rounding there
  const double eps_slack = spec.eps * (1.0 + 1e-9) + 1e-15;
  rep.sharp_below = rep.max_err_below <= eps_slack;
  rep.sharp_above = rep.max_err_above <= eps_slack;
  rep.s_at_c = sharp_alpha(spec.c, a, b, d);
  rep.midpoint_ok = std::abs(rep.s_at_c - 0.5) <= 1e-9;
  rep.pass = rep.sharp_below && rep.sharp_above && rep.midpoint_ok && rep.monotone;
  return rep;
}

GridCell2D solve_2d(double c0, double c1, double eps, double delta_tol_top,
                    double delta_tol_bottom, double delta_render) {
  Solved1D top = solve_1d({c0, eps, delta_tol_top, delta_render});
  Solved1D bottom = solve_1d({c1, eps, delta_tol_bottom, delta_render});
  return {top.a, top.b, bottom.a, bottom.b};
}

Solved1D slice_2d(const GridCell2D& cell, double t) {
  return {(1.0 - t) * cell.v_tl + t * cell.v_bl, (1.0 - t) * cell.v_tr + t * cell.v_br};
}

GridCell3D solve_3d(double c_t0, double c_t1, double c_b0, double c_b1, double eps,
                    double delta_tol, double delta_render) {
  GridCell2D top = solve_2d(c_t0, c_t1, eps, delta_tol, delta_tol, delta_render);
  GridCell2D bottom = solve_2d(c_b0, c_b1, eps, delta_tol, delta_tol, delta_render);
  GridCell3D out;
  out.corner[0][0][0] = top.v_tl;
  out.corner[0][0][1] = top.v_tr;
  out.corner[0][1][0] = top.v_bl;
  out.corner[0][1][1] = top.v_br;
  out.corner[1][0][0] = bottom.v_tl;
  out.corner[1][0][1] = bottom.v_tr;
  out.corner[1][1][0] = bottom.v_bl;
  out.corner[1][1][1] = bottom.v_br;
  return out;
}

}  // namespace dvgo
