#ifndef PBP_NN_HPP
#define PBP_NN_HPP

#include <cmath>

#include <Eigen/Core>

#include "pbp/common.hpp"

namespace pbp {

enum class Activation { tanh_act, gelu };

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh_act;
  if (s == "gelu") return Activation::gelu;
  throw std::invalid_argument("unknown activation: " + s);
}

inline const char* to_string(Activation a) {
  return a == Activation::tanh_act ? "tanh" : "gelu";
}

namespace nn {

inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
}

inline double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * phi;
}

inline double activate(Activation a, double x) {
  return a == Activation::gelu ? gelu(x) : std::tanh(x);
}

inline double activate_grad(Activation a, double x) {
  if (a == Activation::gelu) return gelu_grad(x);
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

inline Eigen::MatrixXd apply(Activation a, const Eigen::MatrixXd& x) {
  return x.unaryExpr([a](double v) { return activate(a, v); });
}

inline Eigen::MatrixXd apply_grad(Activation a, const Eigen::MatrixXd& x) {
  return x.unaryExpr([a](double v) { return activate_grad(a, v); });
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd out = (logits.array() - logits.maxCoeff()).exp();
  return out / out.sum();
}

// dL/dlogits given dL/dsoftmax and the softmax output.
inline Eigen::VectorXd softmax_backward(const Eigen::VectorXd& probs,
                                        const Eigen::VectorXd& dprobs) {
  const double dot = probs.dot(dprobs);
  return probs.array() * (dprobs.array() - dot);
}

inline void softmax_rows_inplace(Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::ArrayXd row = (m.row(i).array() - m.row(i).maxCoeff()).exp();
    m.row(i) = row / row.sum();
  }
}

inline void randomize(Eigen::MatrixXd& m, Rng& rng, double scale) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = rng.uniform_real(-scale, scale);
}

}  // namespace nn
}  // namespace pbp

#endif  // PBP_NN_HPP
