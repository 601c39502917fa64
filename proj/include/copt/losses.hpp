#pragma once

#include <Eigen/Core>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace copt {

enum class LossFamily { SquaredLoss, CrossEntropy };

// Per-sample outer loss phi_i. Squared loss carries its target vector;
// cross-entropy carries a one-hot label index (soft labels are rejected at
// dataset load, so a label is all a sample ever needs).
struct LossKind {
  LossFamily family = LossFamily::SquaredLoss;
  Eigen::VectorXd target;  // squared loss only
  int label = -1;          // cross-entropy only
  int dim = 0;             // output dimension c

  static LossKind squared(Eigen::VectorXd y) {
    LossKind k;
    k.family = LossFamily::SquaredLoss;
    k.dim = static_cast<int>(y.size());
    k.target = std::move(y);
    return k;
  }

  static LossKind cross_entropy(int label_index, int c) {
    if (label_index < 0 || label_index >= c)
      throw std::invalid_argument("cross_entropy: label " +
                                  std::to_string(label_index) +
                                  " out of range [0, " + std::to_string(c) +
                                  ")");
    LossKind k;
    k.family = LossFamily::CrossEntropy;
    k.dim = c;
    k.label = label_index;
    return k;
  }
};

struct LossMeta {
  double smoothness = 1.0;  // gradient Lipschitz constant, 1 for both losses
  double optimal_value = 0.0;
  std::optional<Eigen::VectorXd> optimal_point;  // absent when not attained
};

namespace detail {
inline void check_loss_dim(const LossKind& kind, const Eigen::VectorXd& z,
                           const char* where) {
  if (static_cast<int>(z.size()) != kind.dim)
    throw std::invalid_argument(std::string(where) + ": z has dimension " +
                                std::to_string(z.size()) + ", expected " +
                                std::to_string(kind.dim));
}
}  // namespace detail

// phi_i(z). Cross-entropy is evaluated in the label-shifted form
// log sum_k exp(z_k - z_a) with an extra max subtraction, which keeps the
// value finite for |z| up to ~1e308 and also makes phi >= 0 explicit
// (the k = a term contributes exp(0), so the sum is >= 1).
inline double loss_value(const LossKind& kind, const Eigen::VectorXd& z) {
  detail::check_loss_dim(kind, z, "loss_value");
  if (kind.family == LossFamily::SquaredLoss) {
    return 0.5 * (z - kind.target).squaredNorm();
  }
  const double za = z[kind.label];
  double m = 0.0;  // max over s_k = z_k - z_a; at least 0 because s_a = 0
  for (int k = 0; k < kind.dim; ++k) m = std::max(m, z[k] - za);
  double sum = 0.0;
  for (int k = 0; k < kind.dim; ++k) sum += std::exp(z[k] - za - m);
  return m + std::log(sum);
}

// Gradient of phi_i at z. Squared loss: z - y. Cross-entropy: softmax
// ratios of the shifted logits off the label and minus their sum at the
// label, so the components total exactly zero in floating point.
inline Eigen::VectorXd loss_grad(const LossKind& kind,
                                 const Eigen::VectorXd& z) {
  detail::check_loss_dim(kind, z, "loss_grad");
  if (kind.family == LossFamily::SquaredLoss) {
    return z - kind.target;
  }
  const double za = z[kind.label];
  double m = 0.0;
  for (int k = 0; k < kind.dim; ++k) m = std::max(m, z[k] - za);
  double denom = 0.0;
  for (int k = 0; k < kind.dim; ++k) denom += std::exp(z[k] - za - m);

  Eigen::VectorXd g(kind.dim);
  double off_label_sum = 0.0;
  for (int j = 0; j < kind.dim; ++j) {
    if (j == kind.label) continue;
    g[j] = std::exp(z[j] - za - m) / denom;
    off_label_sum += g[j];
  }
  g[kind.label] = -off_label_sum;
  return g;
}

inline LossMeta loss_meta(const LossKind& kind) {
  LossMeta meta;
  meta.smoothness = 1.0;
  meta.optimal_value = 0.0;
  if (kind.family == LossFamily::SquaredLoss) {
    meta.optimal_point = kind.target;  // phi(y) = 0 attained
  }
  // Cross-entropy: inf_z phi = 0 (push the label logit to +inf), never
  // attained, so optimal_point stays empty.
  return meta;
}

}  // namespace copt
