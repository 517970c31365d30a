#pragma once

#include <vector>

#include "dvgo/activation.hpp"

namespace dvgo {

/// Target: a unit step at position c inside (or beyond) a unit 1D grid cell,
/// occupied on the right. eps is the allowed |S - T| error outside the
/// tolerance band of half-width delta_tol around c; delta_render is the
/// volume-rendering step the post activation uses.
struct SharpSurfaceSpec1D {
  double c = 0.5;
  double eps = 1e-4;
  double delta_tol = 1e-2;
  double delta_render = 0.5;
};

void validate(const SharpSurfaceSpec1D& spec);

/// Post-activated alpha of a 1D cell with endpoint values (a, b):
/// S(x) = 1 - (1 + exp(a(1-x) + bx))^(-delta), evaluated in log space.
double sharp_alpha(double x, double a, double b, double delta_render);

struct Solved1D {
  double a = 0;
  double b = 0;
};

/// Closed-form endpoint values: a sits exactly on the tight bound (branch on
/// delta_render < 1), b follows from S(c) = 0.5. Works unchanged for
/// extrapolated boundaries (c < 0 or c > 1), where the bound flips from an
/// upper to a lower one. c = 0 is singular.
Solved1D solve_1d(const SharpSurfaceSpec1D& spec);

struct ProbeRow {
  double x = 0, s = 0, t = 0;
};

struct Verify1DReport {
  bool pass = false;
  bool sharp_below = false;   // |S - T| <= eps for x <= c - delta_tol
  bool sharp_above = false;   // |S - T| <= eps for x >= c + delta_tol
  bool midpoint_ok = false;   // S(c) = 0.5 within 1e-9
  bool monotone = false;
  double max_err_below = 0;
  double max_err_above = 0;
  double s_at_c = 0;
  std::vector<ProbeRow> probes;
};

/// Probes S on a lattice over the cell [0,1] and checks the approximation
/// criteria. occupied_right=false verifies against the mirrored target
/// (occupied on [0, c)).
Verify1DReport verify_1d(double a, double b, const SharpSurfaceSpec1D& spec, int n_probe,
                         bool occupied_right = true);

struct GridCell2D {
  double v_tl = 0, v_tr = 0, v_bl = 0, v_br = 0;
};

/// Corner values of a 2D cell whose linear boundary runs from c0 on the top
/// edge (t=0) to c1 on the bottom edge (t=1). Tolerances may differ per edge
/// (the beyond-linear construction exploits this).
GridCell2D solve_2d(double c0, double c1, double eps, double delta_tol_top,
                    double delta_tol_bottom, double delta_render);

/// The affine (a(t), b(t)) pair a horizontal slice of the cell interpolates.
Solved1D slice_2d(const GridCell2D& cell, double t);

struct GridCell3D {
  // corner[u][t][x]: u selects the top/bottom face, t the edge, x the 1D end
  double corner[2][2][2] = {};
};

/// Linear surface c(t,u) through a 3D cell: the top face (u=0) boundary runs
/// c_t0 -> c_t1, the bottom face (u=1) boundary c_b0 -> c_b1.
GridCell3D solve_3d(double c_t0, double c_t1, double c_b0, double c_b1, double eps,
                    double delta_tol, double delta_render);

}  // namespace dvgo
