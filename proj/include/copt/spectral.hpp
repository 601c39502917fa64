#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

#include "copt/rng.hpp"

namespace copt {

// Largest-magnitude eigenvalue of a symmetric operator, estimated by plain
// power iteration from a fixed seeded start vector. The callers here apply
// it to PSD matrices (A = J^T J + reg*I, finite-difference Hessians), where
// the Rayleigh quotient converges monotonically from below, so consumers
// that need an upper bound inflate the result slightly.
template <class MatVec>
double power_iteration_sym(const MatVec& apply, int dim, int iters,
                           std::uint64_t seed = 0x9e3779b97f4a7c15ull) {
  Rng rng(seed);
  Eigen::VectorXd u(dim);
  for (int i = 0; i < dim; ++i) u[i] = rng.normal();
  double norm = u.norm();
  if (norm == 0.0) return 0.0;
  u /= norm;

  double lambda = 0.0;
  for (int k = 0; k < iters; ++k) {
    Eigen::VectorXd au = apply(u);
    lambda = u.dot(au);
    const double au_norm = au.norm();
    if (au_norm == 0.0) return 0.0;  // u in the kernel: operator is zero there
    u = au / au_norm;
  }
  // One more application so the reported value matches the final vector.
  lambda = u.dot(apply(u));
  return std::abs(lambda);
}

inline double power_iteration_sym(const Eigen::MatrixXd& A, int iters,
                                  std::uint64_t seed = 0x9e3779b97f4a7c15ull) {
  return power_iteration_sym(
      [&A](const Eigen::VectorXd& v) -> Eigen::VectorXd { return A * v; },
      static_cast<int>(A.rows()), iters, seed);
}

// Spectral norm ||B||_2 via power iteration on B^T B.
inline double spectral_norm(const Eigen::MatrixXd& B, int iters = 50,
                            std::uint64_t seed = 0x9e3779b97f4a7c15ull) {
  const double lambda = power_iteration_sym(
      [&B](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        return B.transpose() * (B * v);
      },
      static_cast<int>(B.cols()), iters, seed);
  return std::sqrt(lambda);
}

}  // namespace copt
