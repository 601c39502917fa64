#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "copt/network.hpp"
#include "copt/spectral.hpp"

namespace copt {

// One outer iteration's regularized least-squares problem
//   min_v  Psi(v) = Phi(v) + (reg/2)||v||^2,
//   Phi(v) = (1/2)(1/n) sum_i ||eta*H_i*v - alpha_i*g_i||^2,
// with reg = eps^2. alphas are stored per sample even though the schedule
// keeps them equal.
struct SubproblemInput {
  JacobianStack jacobians;
  std::vector<Eigen::VectorXd> grads;  // g_i = grad phi_i at h(w;i)
  double eta = 0.0;
  std::vector<double> alphas;
  double reg = 0.0;  // eps^2

  int n() const { return static_cast<int>(jacobians.per_sample.size()); }
  int dim() const {
    return n() == 0 ? 0 : static_cast<int>(jacobians.per_sample[0].cols());
  }
};

// Normal-equations form: grad Psi(v) = A v - b with
//   A = (1/n) sum_i eta^2 H_i^T H_i + reg*I   (SPD, lambda_min >= reg)
//   b = (1/n) sum_i alpha_i * eta * H_i^T g_i.
struct SubproblemSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

// Certificate for an inner solve: by reg-strong convexity of Psi,
// ||v - v*|| <= ||grad Psi(v)|| / reg = distance_bound.
struct SolveCertificate {
  double grad_norm = 0.0;
  double distance_bound = 0.0;
  int iterations = 0;
  double step_size = 0.0;
  bool satisfied = false;
};

// Dense assembly is deliberate: it keeps the solvers testable against
// dense oracles. O(d^3) factorization limits this to desk scale.
inline constexpr int kMaxDirectDim = 4096;

namespace detail {
inline void check_subproblem_input(const SubproblemInput& in) {
  if (in.n() < 1) throw std::invalid_argument("subproblem: empty sample set");
  if (in.eta <= 0.0) throw std::invalid_argument("subproblem: eta must be > 0");
  if (in.reg <= 0.0) throw std::invalid_argument("subproblem: reg must be > 0");
  if (static_cast<int>(in.grads.size()) != in.n() ||
      static_cast<int>(in.alphas.size()) != in.n())
    throw std::invalid_argument("subproblem: per-sample array length mismatch");
  const int d = in.dim();
  const int c = static_cast<int>(in.jacobians.per_sample[0].rows());
  for (int i = 0; i < in.n(); ++i) {
    if (in.jacobians.per_sample[i].rows() != c ||
        in.jacobians.per_sample[i].cols() != d)
      throw std::invalid_argument("subproblem: jacobian " + std::to_string(i) +
                                  " has inconsistent shape");
    if (static_cast<int>(in.grads[i].size()) != c)
      throw std::invalid_argument("subproblem: gradient " + std::to_string(i) +
                                  " has wrong dimension");
    if (in.alphas[i] <= 0.0)
      throw std::invalid_argument("subproblem: alpha " + std::to_string(i) +
                                  " must be > 0");
  }
}
}  // namespace detail

inline SubproblemSystem assemble(const SubproblemInput& in) {
  detail::check_subproblem_input(in);
  const int d = in.dim();
  if (d > kMaxDirectDim)
    throw std::invalid_argument(
        "assemble: d = " + std::to_string(d) + " exceeds the direct-solve "
        "limit of " + std::to_string(kMaxDirectDim));

  const double inv_n = 1.0 / in.n();
  const double eta2 = in.eta * in.eta;
  SubproblemSystem sys;
  sys.A = Eigen::MatrixXd::Zero(d, d);
  sys.b = Eigen::VectorXd::Zero(d);
  // Fixed left-to-right sample order keeps assembly bit-reproducible.
  for (int i = 0; i < in.n(); ++i) {
    const Eigen::MatrixXd& H = in.jacobians.per_sample[i];
    sys.A.noalias() += (inv_n * eta2) * (H.transpose() * H);
    sys.b.noalias() += (inv_n * in.alphas[i] * in.eta) *
                       (H.transpose() * in.grads[i]);
    if (!sys.A.allFinite() || !sys.b.allFinite())
      throw std::runtime_error("assemble: non-finite contribution at sample " +
                               std::to_string(i));
  }
  sys.A.diagonal().array() += in.reg;
  return sys;
}

inline double phi_value(const SubproblemInput& in, const Eigen::VectorXd& v) {
  detail::check_subproblem_input(in);
  if (v.size() != in.dim())
    throw std::invalid_argument("phi_value: v has wrong dimension");
  double acc = 0.0;
  for (int i = 0; i < in.n(); ++i)
    acc += (in.eta * (in.jacobians.per_sample[i] * v) -
            in.alphas[i] * in.grads[i])
               .squaredNorm();
  return 0.5 * acc / in.n();
}

inline Eigen::VectorXd psi_grad(const SubproblemSystem& sys,
                                const Eigen::VectorXd& v) {
  if (v.size() != sys.A.rows())
    throw std::invalid_argument("psi_grad: v has wrong dimension");
  return sys.A * v - sys.b;
}

// Exact minimizer via Cholesky. A is SPD by construction (reg > 0), so a
// factorization failure means the inputs were broken (non-finite Jacobians
// or a vanishing regularizer).
inline Eigen::VectorXd solve_closed_form(const SubproblemSystem& sys) {
  Eigen::LLT<Eigen::MatrixXd> llt(sys.A);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(
        "solve_closed_form: Cholesky failed; the system is not numerically "
        "SPD (regularizer too small or non-finite Jacobians)");
  return llt.solve(sys.b);
}

// Inner gradient descent with the computable stopping certificate
// ||grad Psi(v)|| / reg <= tol_eps, which implies ||v - v*|| <= tol_eps.
// The step is 1/L_est with L_est from power iteration (50 steps, inflated
// by 1.01 to cover the estimate approaching lambda_max from below).
// Starts at v0 = 0 unless a warm start is supplied; warm starting is an
// off-script option, the per-iteration analysis assumes a cold start.
inline std::pair<Eigen::VectorXd, SolveCertificate> solve_inner_gd(
    const SubproblemInput& in, const SubproblemSystem& sys, double tol_eps,
    int max_iters, const Eigen::VectorXd* warm_start = nullptr) {
  if (tol_eps <= 0.0)
    throw std::invalid_argument("solve_inner_gd: tol_eps must be > 0");
  if (max_iters < 0)
    throw std::invalid_argument("solve_inner_gd: max_iters must be >= 0");
  const int d = static_cast<int>(sys.A.rows());

  const double L_est = 1.01 * power_iteration_sym(sys.A, 50);
  const double step = L_est > 0.0 ? 1.0 / L_est : 0.0;

  Eigen::VectorXd v = warm_start ? *warm_start : Eigen::VectorXd::Zero(d);
  if (v.size() != d)
    throw std::invalid_argument("solve_inner_gd: warm start has wrong size");

  SolveCertificate cert;
  cert.step_size = step;
  Eigen::VectorXd g = psi_grad(sys, v);
  int k = 0;
  while (true) {
    cert.grad_norm = g.norm();
    cert.distance_bound = cert.grad_norm / in.reg;
    if (cert.distance_bound <= tol_eps) {
      cert.satisfied = true;
      break;
    }
    if (k >= max_iters) {
      cert.satisfied = false;  // best effort; caller decides what to do
      break;
    }
    v.noalias() -= step * g;
    g = psi_grad(sys, v);
    ++k;
  }
  cert.iterations = k;
  return {v, cert};
}

// Diagnostics around the regularized solution: Phi there, its squared norm,
// and the smallest direction bound consistent with both regularized-solution
// inequalities (||v*||^2 <= 2 + V and Phi(v*) <= (1 + V/2) eps^2).
struct DirectionBound {
  double phi_at_vreg = 0.0;
  double norm_sq = 0.0;
  double V_implied = 0.0;
};

inline DirectionBound check_direction_bound(const SubproblemInput& in,
                                            const Eigen::VectorXd& v_reg,
                                            double eps) {
  DirectionBound out;
  out.phi_at_vreg = phi_value(in, v_reg);
  out.norm_sq = v_reg.squaredNorm();
  const double from_norm = out.norm_sq - 2.0;
  const double from_phi = 2.0 * out.phi_at_vreg / (eps * eps) - 2.0;
  out.V_implied = std::max({from_norm, from_phi, 0.0});
  return out;
}

}  // namespace copt
