#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "copt/dataset.hpp"
#include "copt/losses.hpp"
#include "copt/network.hpp"
#include "copt/parallel.hpp"
#include "copt/subproblem.hpp"

namespace copt {

enum class Algorithm { ClosedForm, InnerGD };

// Outer-loop schedule: T = ceil(beta/eps) iterations, constant step
// eta = D*sqrt(eps), and the geometric learning-rate ladder
//   alpha^(t) = (1+eps)^t * alpha / (e^beta * L_phi),
// which stays <= alpha/L_phi for every consumed index t < T because
// (1+eps)^(beta/eps) <= e^beta.
struct TrainConfig {
  double eps = 0.1;
  double beta = 1.0;
  double D = 1.0;
  double alpha = 0.2;
  Algorithm algorithm = Algorithm::ClosedForm;
  double inner_tol = 0.0;  // <= 0 means "use eps"
  int inner_max_iters = 200000;
  std::uint64_t seed = 0;

  int iterations() const { return static_cast<int>(std::ceil(beta / eps)); }
  double step() const { return D * std::sqrt(eps); }
  double effective_inner_tol() const { return inner_tol > 0.0 ? inner_tol : eps; }

  void validate() const {
    if (eps <= 0.0) throw std::invalid_argument("TrainConfig: eps must be > 0");
    if (beta <= 0.0) throw std::invalid_argument("TrainConfig: beta must be > 0");
    if (D <= 0.0) throw std::invalid_argument("TrainConfig: D must be > 0");
    if (inner_max_iters < 0)
      throw std::invalid_argument("TrainConfig: inner_max_iters must be >= 0");
    const double cap = algorithm == Algorithm::ClosedForm ? 1.0 / 3.0 : 0.25;
    if (alpha <= 0.0 || alpha >= cap)
      throw std::invalid_argument(
          "TrainConfig: alpha must lie in (0, " +
          std::string(algorithm == Algorithm::ClosedForm ? "1/3" : "1/4") +
          ") for this algorithm");
  }
};

inline double lr_schedule(const TrainConfig& config, int t,
                          double L_phi = 1.0) {
  if (t < 0 || t > config.iterations())
    throw std::out_of_range("lr_schedule: t = " + std::to_string(t) +
                            " outside the schedule range [0, " +
                            std::to_string(config.iterations()) + "]");
  return std::pow(1.0 + config.eps, t) * config.alpha /
         (std::exp(config.beta) * L_phi);
}

// Per-outer-step diagnostics.
struct IterationRecord {
  int t = 0;
  double objective_F = 0.0;
  double gap_upper = 0.0;    // F(w^t) - (1/n) sum_i inf phi_i
  double residual_phi = 0.0; // Phi at the direction actually taken
  double v_norm_sq = 0.0;
  int inner_iters = 0;
  double alpha_t = 0.0;
  AssumptionEstimates assumption_snapshot;
};

// Empirical check of the convergence guarantee: the averaged gap surrogate
// against the bound's right-hand side with estimated constants substituted.
struct TheoremAudit {
  double lhs_avg_gap = 0.0;
  double rhs_bound = std::numeric_limits<double>::quiet_NaN();
  bool satisfied = false;
  bool applicable = false;  // false when the initial distance is undefined
};

struct RunResult {
  WeightVector weights;
  std::vector<IterationRecord> records;
  bool completed = false;
  bool certificates_ok = true;  // only meaningful for the inner-GD algorithm
  std::string abort_reason;
  std::optional<double> init_distance;  // (1/n) sum ||h(w0;i) - y_i||^2
  AssumptionEstimates trajectory_estimates;  // max over recorded snapshots
};

inline double objective_F(const MlpSpec& spec, const Dataset& data,
                          const WeightVector& w) {
  std::vector<double> vals(data.size());
  parallel_for(data.size(), [&](int i) {
    vals[i] = loss_value(data.losses[i], forward(spec, w, data.inputs[i]));
  });
  double sum = 0.0;
  for (double v : vals) sum += v;
  return sum / data.size();
}

// Computable surrogate for F(w) - F_*: subtracting the per-sample infima
// upper-bounds the true gap because F_* >= (1/n) sum_i inf phi_i.
inline double gap_upper(const MlpSpec& spec, const Dataset& data,
                        const WeightVector& w) {
  double opt = 0.0;
  for (const auto& kind : data.losses) opt += loss_meta(kind).optimal_value;
  return objective_F(spec, data, w) - opt / data.size();
}

namespace detail {

inline void check_run_inputs(const TrainConfig& config, const MlpSpec& spec,
                             const Dataset& data, const WeightVector& w0) {
  config.validate();
  spec.validate();
  if (data.size() < 1) throw std::invalid_argument("run: empty dataset");
  if (data.input_dim != spec.input_dim() ||
      data.output_dim != spec.output_dim())
    throw std::invalid_argument("run: dataset dimensions (" +
                                std::to_string(data.input_dim) + " -> " +
                                std::to_string(data.output_dim) +
                                ") do not match the network");
  if (w0.size() != spec.param_count())
    throw std::invalid_argument("run: w0 has wrong length");
  for (const auto& kind : data.losses)
    if (kind.family != data.losses.front().family)
      throw std::invalid_argument(
          "run: mixed loss families in one dataset are not supported "
          "(the analysis assumes a single smoothness constant)");
}

}  // namespace detail

// Outer loop shared by both algorithms. Strictly sequential in t; the
// per-sample forward/Jacobian work inside an iteration runs through
// parallel_for with deterministic left-to-right reductions, so a run is
// bit-reproducible for a fixed config regardless of the thread budget.
inline RunResult run(const TrainConfig& config, const MlpSpec& spec,
                     const Dataset& data, const WeightVector& w0) {
  detail::check_run_inputs(config, spec, data, w0);
  const int T = config.iterations();
  const int n = data.size();
  const double eta = config.step();
  const double reg = config.eps * config.eps;
  const bool squared_only =
      data.losses.front().family == LossFamily::SquaredLoss;

  double opt_mean = 0.0;
  for (const auto& kind : data.losses)
    opt_mean += loss_meta(kind).optimal_value;
  opt_mean /= n;

  RunResult result;
  result.weights = w0;
  result.records.reserve(T);

  auto merge_estimates = [&result](const AssumptionEstimates& e) {
    auto& acc = result.trajectory_estimates;
    acc.hessian_bound_G = std::max(acc.hessian_bound_G, e.hessian_bound_G);
    acc.jacobian_bound_H = std::max(acc.jacobian_bound_H, e.jacobian_bound_H);
    acc.direction_bound_V = std::max(acc.direction_bound_V, e.direction_bound_V);
  };

  for (int t = 0; t < T; ++t) {
    // Forward pass and per-sample loss gradients.
    std::vector<Eigen::VectorXd> outputs(n);
    parallel_for(n, [&](int i) {
      outputs[i] = forward(spec, result.weights, data.inputs[i]);
    });

    if (t == 0 && squared_only) {
      double dist = 0.0;
      for (int i = 0; i < n; ++i)
        dist += (outputs[i] - data.losses[i].target).squaredNorm();
      result.init_distance = dist / n;
    }

    double F = 0.0;
    for (int i = 0; i < n; ++i) F += loss_value(data.losses[i], outputs[i]);
    F /= n;
    if (!std::isfinite(F)) {
      result.abort_reason =
          "non-finite objective at iteration " + std::to_string(t);
      return result;  // last valid state: weights before this iteration
    }

    SubproblemInput input;
    input.jacobians = jacobian_stack(spec, result.weights, data);
    input.grads.resize(n);
    for (int i = 0; i < n; ++i)
      input.grads[i] = loss_grad(data.losses[i], outputs[i]);
    input.eta = eta;
    input.alphas.assign(n, lr_schedule(config, t));
    input.reg = reg;

    const SubproblemSystem sys = assemble(input);

    IterationRecord rec;
    rec.t = t;
    rec.objective_F = F;
    rec.gap_upper = F - opt_mean;
    rec.alpha_t = input.alphas.front();

    Eigen::VectorXd v;
    if (config.algorithm == Algorithm::ClosedForm) {
      v = solve_closed_form(sys);
      rec.inner_iters = 0;
    } else {
      auto [v_gd, cert] = solve_inner_gd(input, sys, config.effective_inner_tol(),
                                         config.inner_max_iters);
      v = std::move(v_gd);
      rec.inner_iters = cert.iterations;
      if (!cert.satisfied) {
        // The guarantee needs every inner solve certified; stop rather than
        // silently continuing with an unqualified direction.
        const DirectionBound diag = check_direction_bound(input, v, config.eps);
        rec.residual_phi = diag.phi_at_vreg;
        rec.v_norm_sq = diag.norm_sq;
        result.records.push_back(rec);
        result.certificates_ok = false;
        result.abort_reason = "inner solver certificate unsatisfied at "
                              "iteration " + std::to_string(t);
        return result;
      }
    }

    const DirectionBound db = check_direction_bound(input, v, config.eps);
    rec.residual_phi = db.phi_at_vreg;
    rec.v_norm_sq = db.norm_sq;

    AssumptionEstimates snap =
        estimate_constants(spec, {result.weights}, data, config.eps);
    snap.direction_bound_V = db.V_implied;
    rec.assumption_snapshot = snap;
    merge_estimates(snap);

    result.records.push_back(rec);
    result.weights -= eta * v;
  }

  result.completed = true;
  return result;
}

// Evaluates the guarantee's right-hand side with the estimated constants
// plugged in and compares it against the observed average gap. c is the
// output dimension; L_phi is 1 for both implemented losses. Runs without a
// defined initial distance (cross-entropy) are reported not applicable.
inline TheoremAudit audit_theorem(const TrainConfig& config,
                                  const std::vector<IterationRecord>& records,
                                  const AssumptionEstimates& estimates,
                                  std::optional<double> init_distance, int c,
                                  double L_phi = 1.0) {
  if (records.empty())
    throw std::invalid_argument("audit_theorem: no records");
  if (static_cast<int>(records.size()) != config.iterations())
    throw std::invalid_argument("audit_theorem: records incomplete (" +
                                std::to_string(records.size()) + " of " +
                                std::to_string(config.iterations()) + ")");

  TheoremAudit audit;
  double sum = 0.0;
  for (const auto& r : records) sum += r.gap_upper;
  audit.lhs_avg_gap = sum / records.size();

  if (!init_distance.has_value()) return audit;  // not applicable
  audit.applicable = true;

  const double eps = config.eps;
  const double beta = config.beta;
  const double alpha = config.alpha;
  const double D = config.D;
  const double G = estimates.hessian_bound_G;
  const double V = estimates.direction_bound_V;
  const double Hb = estimates.jacobian_bound_H;
  const double ebeta = std::exp(beta);

  double rhs = 0.0;
  if (config.algorithm == Algorithm::ClosedForm) {
    const double one_minus = 1.0 - 3.0 * alpha;
    const double term1 = ebeta * L_phi * (1.0 + eps) /
                         (2.0 * one_minus * alpha * beta) *
                         init_distance.value() * eps;
    const double inner = 4.0 + (V + 2.0) * G * D * D;
    const double term2 = ebeta * L_phi * (3.0 * eps + 2.0) /
                         (8.0 * alpha * one_minus) *
                         (c * inner * inner + 8.0 + 4.0 * V) * eps;
    rhs = term1 + term2;
  } else {
    const double one_minus = 1.0 - 4.0 * alpha;
    const double term1 = ebeta * L_phi * (1.0 + eps) /
                         (2.0 * one_minus * alpha * beta) *
                         init_distance.value() * eps;
    const double inner = 2.0 + (V + eps * eps + 2.0) * G * D * D;
    const double term2 = ebeta * L_phi * (4.0 * eps + 3.0) /
                         (2.0 * alpha * one_minus) *
                         (D * D * Hb * Hb + c * inner * inner + 2.0 + V) * eps;
    rhs = term1 + term2;
  }
  audit.rhs_bound = rhs;
  audit.satisfied = audit.lhs_avg_gap <= rhs;
  return audit;
}

}  // namespace copt
