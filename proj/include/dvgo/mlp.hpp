#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dvgo/rng.hpp"

namespace dvgo {

/// Fully connected net: ReLU hidden layers, sigmoid output. Weight matrices
/// are (out x in); activations flow as column-per-sample matrices.
struct MlpParams {
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;

  int input_dim() const { return W.empty() ? 0 : static_cast<int>(W.front().cols()); }
  int output_dim() const { return W.empty() ? 0 : static_cast<int>(W.back().rows()); }
  std::size_t layer_count() const { return W.size(); }
  std::size_t parameter_count() const;

  /// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
  static MlpParams create(int in_dim, int hidden, int n_hidden, int out_dim, Rng& rng);
};

/// Throws unless layer shapes chain from input_dim to output_dim.
void validate(const MlpParams& mlp);

/// Cached pre-activations for the backward pass.
struct MlpTape {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> z;  // pre-activation per layer
};

struct MlpGrads {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;

  static MlpGrads zeros_like(const MlpParams& mlp);
  void add(const MlpGrads& other);
  void scale(double s);
};

/// Forward over a batch (input_dim x N) -> (output_dim x N), sigmoid applied.
/// When tape is non-null it is filled for mlp_backward.
Eigen::MatrixXd mlp_forward(const MlpParams& mlp, const Eigen::MatrixXd& input, MlpTape* tape);

/// Exact adjoint: given dL/d(output), accumulates parameter gradients into
/// grads and optionally returns dL/d(input).
void mlp_backward(const MlpParams& mlp, const MlpTape& tape, const Eigen::MatrixXd& d_output,
                  MlpGrads& grads, Eigen::MatrixXd* d_input);

}  // namespace dvgo
