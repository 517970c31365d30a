#include "dvgo/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace dvgo {

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
  return n;
}

MlpParams MlpParams::create(int in_dim, int hidden, int n_hidden, int out_dim, Rng& rng) {
  if (in_dim < 1 || out_dim < 1 || (n_hidden > 0 && hidden < 1))
    throw std::invalid_argument("invalid mlp architecture");
  MlpParams mlp;
  int prev = in_dim;
  auto push_layer = [&](int rows, int cols) {
    Eigen::MatrixXd W(rows, cols);
    double bound = std::sqrt(6.0 / (rows + cols));
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) W(r, c) = rng.uniform(-bound, bound);
    mlp.W.push_back(std::move(W));
    mlp.b.push_back(Eigen::VectorXd::Zero(rows));
  };
  for (int l = 0; l < n_hidden; ++l) {
    push_layer(hidden, prev);
    prev = hidden;
  }
  push_layer(out_dim, prev);
  return mlp;
}

void validate(const MlpParams& mlp) {
  if (mlp.W.empty() || mlp.W.size() != mlp.b.size())
    throw std::invalid_argument("mlp has no layers or mismatched bias count");
  for (std::size_t l = 0; l < mlp.W.size(); ++l) {
    if (mlp.b[l].size() != mlp.W[l].rows())
      throw std::invalid_argument("mlp bias shape mismatch");
    if (l > 0 && mlp.W[l].cols() != mlp.W[l - 1].rows())
      throw std::invalid_argument("mlp layer shapes do not chain");
  }
}

MlpGrads MlpGrads::zeros_like(const MlpParams& mlp) {
  MlpGrads g;
  for (std::size_t l = 0; l < mlp.W.size(); ++l) {
    g.dW.push_back(Eigen::MatrixXd::Zero(mlp.W[l].rows(), mlp.W[l].cols()));
    g.db.push_back(Eigen::VectorXd::Zero(mlp.b[l].size()));
  }
  return g;
}

void MlpGrads::add(const MlpGrads& other) {
  for (std::size_t l = 0; l < dW.size(); ++l) {
    dW[l] += other.dW[l];
    db[l] += other.db[l];
  }
}

void MlpGrads::scale(double s) {
  for (std::size_t l = 0; l < dW.size(); ++l) {
    dW[l] *= s;
    db[l] *= s;
  }
}

Eigen::MatrixXd mlp_forward(const MlpParams& mlp, const Eigen::MatrixXd& input, MlpTape* tape) {
  validate(mlp);
  if (input.rows() != mlp.input_dim())
    throw std::invalid_argument("mlp input dimension mismatch");
  if (tape) {
    tape->input = input;
    tape->z.clear();
  }
  Eigen::MatrixXd a = input;
  const std::size_t L = mlp.W.size();
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd z = (mlp.W[l] * a).colwise() + mlp.b[l];
    if (tape) tape->z.push_back(z);
    if (l + 1 < L)
      a = z.cwiseMax(0.0);
    else
      a = z.unaryExpr([](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                                   : std::exp(x) / (1.0 + std::exp(x)); });
  }
  return a;
}

void mlp_backward(const MlpParams& mlp, const MlpTape& tape, const Eigen::MatrixXd& d_output,
                  MlpGrads& grads, Eigen::MatrixXd* d_input) {
  const std::size_t L = mlp.W.size();
  if (tape.z.size() != L) throw std::invalid_argument("mlp tape does not match parameters");
  if (d_output.rows() != mlp.output_dim() || d_output.cols() != tape.z.back().cols())
    throw std::invalid_argument("mlp upstream gradient shape mismatch");

  // output layer: sigma'(z) = s(1-s)
  Eigen::MatrixXd out = tape.z.back().unaryExpr(
      [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                   : std::exp(x) / (1.0 + std::exp(x)); });
  Eigen::MatrixXd dz = d_output.cwiseProduct(out.cwiseProduct(Eigen::MatrixXd::Ones(out.rows(), out.cols()) - out));

  for (std::size_t l = L; l-- > 0;) {
    if (l == 0) {
      grads.dW[0].noalias() += dz * tape.input.transpose();
      grads.db[0] += dz.rowwise().sum();
      if (d_input) d_input->noalias() = mlp.W[0].transpose() * dz;
      break;
    }
    Eigen::MatrixXd a_prev = tape.z[l - 1].cwiseMax(0.0);
    grads.dW[l].noalias() += dz * a_prev.transpose();
    grads.db[l] += dz.rowwise().sum();
    Eigen::MatrixXd da = mlp.W[l].transpose() * dz;
    dz = da.cwiseProduct(tape.z[l - 1].unaryExpr([](double x) { return x > 0 ? 1.0 : 0.0; }));
  }
}

}  // namespace dvgo
