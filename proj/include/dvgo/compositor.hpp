#pragma once

#include <vector>

#include "dvgo/activation.hpp"
#include "dvgo/grid.hpp"
#include "dvgo/rgb.hpp"

namespace dvgo {

/// Output of the volume-rendering quadrature for one ray.
struct RenderResult {
  Rgb color{0, 0, 0};
  std::vector<double> weights;    // T_i * alpha_i per point
  double bg_transmittance = 1.0;  // T_{K+1}
};

/// Front-to-back alpha compositing over a pre-defined background color.
RenderResult composite(const std::vector<double>& alphas, const std::vector<Rgb>& colors,
                       Rgb bg);

/// Upstream gradients accepted by composite_backward. Any field may be empty
/// (treated as zero).
struct CompositeUpstream {
  Rgb d_color{0, 0, 0};
  std::vector<double> d_weights;  // per-point dL/dw_i
  double d_bg_transmittance = 0.0;
};

/// Exact adjoint of composite. Appends nothing; writes gradients w.r.t. each
/// alpha and color.
void composite_backward(const std::vector<double>& alphas, const std::vector<Rgb>& colors,
                        Rgb bg, const CompositeUpstream& upstream,
                        std::vector<double>& d_alphas, std::vector<Rgb>& d_colors);

/// Ordering of the softplus/alpha activations relative to interpolation.
enum class ActivationMode { pre, in, post };

/// Alpha at a world point from a single-channel density grid.
///   post: alpha(softplus(interp(V)))
///   in:   alpha(interp(softplus(V)))
///   pre:  interp(alpha(softplus(V)))
/// pre/in only need the 8 activated corner values, which equals activating
/// the whole grid first.
double activated_alpha(const DenseGrid& grid, Vec3 p, double delta, ActivationBias bias,
                       ActivationMode mode);

}  // namespace dvgo
