#include "dvgo/compositor.hpp"

#include <stdexcept>

namespace dvgo {

RenderResult composite(const std::vector<double>& alphas, const std::vector<Rgb>& colors,
                       Rgb bg) {
  if (alphas.size() != colors.size())
    throw std::invalid_argument("composite: alphas and colors must have equal length");
  RenderResult res;
  res.weights.resize(alphas.size());
  double T = 1.0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    double w = T * alphas[i];
    res.weights[i] = w;
    res.color = res.color + w * colors[i];
    T *= 1.0 - alphas[i];
  }
  res.bg_transmittance = T;
  res.color = res.color + T * bg;
  return res;
}

void composite_backward(const std::vector<double>& alphas, const std::vector<Rgb>& colors,
                        Rgb bg, const CompositeUpstream& up, std::vector<double>& d_alphas,
                        std::vector<Rgb>& d_colors) {
  const std::size_t n = alphas.size();
  if (colors.size() != n) throw std::invalid_argument("composite_backward: length mismatch");
  if (!up.d_weights.empty() && up.d_weights.size() != n)
    throw std::invalid_argument("composite_backward: d_weights length mismatch");
  d_alphas.assign(n, 0.0);
  d_colors.assign(n, Rgb{0, 0, 0});

  // Recompute the transmittance prefix, then run the adjoint of the forward
  // recurrence T_{i+1} = T_i (1 - a_i), w_i = T_i a_i backward. No division,
  // so alpha = 1 is handled exactly.
  std::vector<double> T(n + 1);
  T[0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) T[i + 1] = T[i] * (1.0 - alphas[i]);

  auto u_of = [&](std::size_t i) {
    double u = up.d_color[0] * colors[i][0] + up.d_color[1] * colors[i][1] +
               up.d_color[2] * colors[i][2];
    if (!up.d_weights.empty()) u += up.d_weights[i];
    return u;
  };

  double G = up.d_color[0] * bg[0] + up.d_color[1] * bg[1] + up.d_color[2] * bg[2] +
             up.d_bg_transmittance;  // dL/dT_{K+1}
  for (std::size_t k = n; k-- > 0;) {
    double u = u_of(k);
    d_alphas[k] = T[k] * (u - G);
    for (int c = 0; c < 3; ++c) d_colors[k][c] = T[k] * alphas[k] * up.d_color[c];
    G = u * alphas[k] + G * (1.0 - alphas[k]);
  }
}

double activated_alpha(const DenseGrid& grid, Vec3 p, double delta, ActivationBias bias,
                       ActivationMode mode) {
  if (grid.channels() != 1)
    throw std::invalid_argument("activated_alpha expects a density grid (C=1)");
  TrilinearStencil st = grid.stencil(p);
  const std::vector<double>& v = grid.values();
  switch (mode) {
    case ActivationMode::post: {
      double raw = 0;
      for (int j = 0; j < 8; ++j) raw += st.w[j] * v[st.idx[j]];
      return alpha_from_sigma(softplus_shifted(raw, bias), delta);
    }
    case ActivationMode::in: {
      double sigma = 0;
      for (int j = 0; j < 8; ++j) sigma += st.w[j] * softplus_shifted(v[st.idx[j]], bias);
      return alpha_from_sigma(sigma, delta);
    }
    case ActivationMode::pre: {
      double alpha = 0;
      for (int j = 0; j < 8; ++j)
        alpha += st.w[j] * alpha_from_sigma(softplus_shifted(v[st.idx[j]], bias), delta);
      return alpha;
    }
  }
  return 0;  // unreachable
}

}  // namespace dvgo
