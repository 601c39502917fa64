#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "copt/config.hpp"
#include "copt/dataset.hpp"
#include "copt/losses.hpp"
#include "copt/network.hpp"
#include "copt/rng.hpp"
#include "copt/subproblem.hpp"
#include "copt/trainer.hpp"

namespace copt {

inline Dataset load_dataset(const ExperimentConfig& cfg) {
  switch (cfg.source) {
    case DatasetSource::CsvFile:
      return load_csv(cfg.csv_path, cfg.loss == LossFamily::CrossEntropy
                                        ? cfg.network.output_dim()
                                        : 0);
    case DatasetSource::TwoPointAppendix:
      return make_two_point(cfg.two_point_x1, cfg.two_point_x2,
                            cfg.loss == LossFamily::CrossEntropy);
    case DatasetSource::GaussianBlobs:
      return make_gaussian_blobs(cfg.data_n, cfg.data_m, cfg.data_c,
                                 cfg.data_seed, cfg.loss);
    case DatasetSource::RandomRegression:
      return make_random_regression(cfg.data_n, cfg.data_m, cfg.data_c,
                                    cfg.data_seed);
  }
  throw std::logic_error("load_dataset: unhandled source");
}

// The n*c x d system whose solvability certifies that a direction with
// eta*H_i*v = alpha_i*g_i for every sample exists at these weights. Rank and
// least-squares residual come from one SVD; the rank threshold is the usual
// max-dimension * sigma_max * 1e-12 cutoff.
struct StackedSystem {
  Eigen::MatrixXd A_stack;  // rows: samples in order, eta * H_i
  Eigen::VectorXd b_stack;  // alpha_i * g_i, same order
  int numeric_rank = 0;
  double residual_min = 0.0;
};

inline StackedSystem interpolation_feasibility(const MlpSpec& spec,
                                               const WeightVector& w,
                                               const Dataset& data, double eta,
                                               const std::vector<double>& alphas) {
  spec.validate();
  if (data.size() < 1)
    throw std::invalid_argument("interpolation_feasibility: empty dataset");
  if (static_cast<int>(alphas.size()) != data.size())
    throw std::invalid_argument("interpolation_feasibility: alphas size mismatch");
  const int n = data.size();
  const int c = spec.output_dim();
  const int d = spec.param_count();

  StackedSystem sys;
  sys.A_stack.resize(n * c, d);
  sys.b_stack.resize(n * c);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd h = forward(spec, w, data.inputs[i]);
    sys.A_stack.middleRows(i * c, c) = eta * jacobian(spec, w, data.inputs[i]);
    sys.b_stack.segment(i * c, c) = alphas[i] * loss_grad(data.losses[i], h);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      sys.A_stack, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sigma = svd.singularValues();
  if (sigma.size() > 0 && sigma(0) > 0.0) {
    const double cutoff = std::max(n * c, d) * sigma(0) * 1e-12;
    for (int k = 0; k < sigma.size(); ++k)
      if (sigma(k) > cutoff) ++sys.numeric_rank;
    const Eigen::VectorXd v_ls = svd.solve(sys.b_stack);
    sys.residual_min = (sys.A_stack * v_ls - sys.b_stack).norm();
  } else {
    sys.numeric_rank = 0;
    sys.residual_min = sys.b_stack.norm();
  }
  return sys;
}

// One row of the initialization-scaling experiment: the two-layer linear
// net h(x) = W2^T W1^T x on the two-point dataset with m = ceil(1/eps)
// hidden neurons, all of them carrying the same nonzero base weights. The
// stacked Jacobian then satisfies Q(m) Q(m)^T = m * Q(1) Q(1)^T, so its
// spectral norm grows exactly like sqrt(m) ~ 1/sqrt(eps): halving eps
// multiplies the norm by sqrt(2).
struct QScaleRow {
  double eps = 0.0;
  int m = 0;
  double q_norm = 0.0;
};

inline std::vector<QScaleRow> q_norm_scaling_experiment(
    const std::vector<double>& eps_list, std::uint64_t seed) {
  if (eps_list.empty())
    throw std::invalid_argument("q_norm_scaling_experiment: empty eps list");
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    if (eps_list[k] <= 0.0)
      throw std::invalid_argument("q_norm_scaling_experiment: eps must be > 0");
    if (k > 0 && eps_list[k] >= eps_list[k - 1])
      throw std::invalid_argument(
          "q_norm_scaling_experiment: eps list must be strictly descending");
  }

  // Base weights are drawn once and reused for every eps so the only thing
  // changing across rows is the neuron count.
  Rng rng(seed);
  auto draw = [&rng]() {
    double v = 0.0;
    do v = rng.normal(); while (std::abs(v) < 0.1);
    return v;
  };
  const double a1 = draw(), a2 = draw(), b1 = draw(), b2 = draw();

  const Dataset data = make_two_point();
  std::vector<QScaleRow> rows;
  rows.reserve(eps_list.size());
  for (double eps : eps_list) {
    QScaleRow row;
    row.eps = eps;
    row.m = static_cast<int>(std::ceil(1.0 / eps));

    MlpSpec spec;
    spec.layer_sizes = {2, row.m, 2};
    spec.activations = {Activation::Identity};
    spec.with_biases = false;

    std::vector<LayerParams> params(2);
    params[0].W.resize(2, row.m);
    for (int j = 0; j < row.m; ++j) params[0].W.col(j) = Eigen::Vector2d(a1, a2);
    params[0].b = Eigen::VectorXd::Zero(row.m);
    params[1].W.resize(row.m, 2);
    for (int j = 0; j < row.m; ++j)
      params[1].W.row(j) = Eigen::RowVector2d(b1, b2);
    params[1].b = Eigen::VectorXd::Zero(2);
    const WeightVector w = vectorize(spec, params);

    Eigen::MatrixXd Q(data.size() * 2, spec.param_count());
    for (int i = 0; i < data.size(); ++i)
      Q.middleRows(2 * i, 2) = jacobian(spec, w, data.inputs[i]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Q);
    row.q_norm = svd.singularValues()(0);
    rows.push_back(row);
  }
  return rows;
}

// Plain chain-rule baselines, full-batch GD or uniform-with-replacement
// minibatch SGD on F. Informational only: no guarantee is attached, the
// records just share the trainer's schema so they land in the same CSV.
struct BaselineResult {
  std::vector<IterationRecord> records;
  WeightVector weights;
  bool diverged = false;
};

inline BaselineResult run_baseline(const ExperimentConfig& cfg,
                                   const Dataset& data,
                                   const WeightVector& w0) {
  if (cfg.baseline == BaselineKind::None)
    throw std::invalid_argument("run_baseline: no baseline configured");
  const MlpSpec& spec = cfg.network;
  const int n = data.size();

  BaselineResult result;
  result.weights = w0;
  Rng rng(cfg.baseline_seed);

  double opt_mean = 0.0;
  for (const auto& kind : data.losses)
    opt_mean += loss_meta(kind).optimal_value;
  opt_mean /= n;

  for (int t = 0; t < cfg.baseline_iters; ++t) {
    const double F = objective_F(spec, data, result.weights);
    if (!std::isfinite(F) || F > 1e12) {
      result.diverged = true;  // truncate: keep the records up to here
      return result;
    }

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(spec.param_count());
    if (cfg.baseline == BaselineKind::FullGradientDescent) {
      for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd h = forward(spec, result.weights, data.inputs[i]);
        grad.noalias() += jacobian(spec, result.weights, data.inputs[i]).transpose() *
                          loss_grad(data.losses[i], h);
      }
      grad /= n;
    } else {
      for (int k = 0; k < cfg.baseline_batch; ++k) {
        const int i = static_cast<int>(rng.index(n));
        const Eigen::VectorXd h = forward(spec, result.weights, data.inputs[i]);
        grad.noalias() += jacobian(spec, result.weights, data.inputs[i]).transpose() *
                          loss_grad(data.losses[i], h);
      }
      grad /= cfg.baseline_batch;
    }

    IterationRecord rec;
    rec.t = t;
    rec.objective_F = F;
    rec.gap_upper = F - opt_mean;
    rec.residual_phi = std::numeric_limits<double>::quiet_NaN();  // not defined here
    rec.v_norm_sq = grad.squaredNorm();
    rec.inner_iters = 0;
    rec.alpha_t = cfg.baseline_step;
    result.records.push_back(rec);

    result.weights -= cfg.baseline_step * grad;
  }
  return result;
}

namespace detail {

inline std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Non-record context for the summary document.
struct SummaryInfo {
  std::string config_echo;
  std::string algorithm;
  double wall_clock_seconds = 0.0;
  bool completed = true;
  bool certificates_ok = true;
  std::string abort_reason;
  std::optional<double> init_distance;
};

// metrics.csv: one row per outer iteration, %.17g so a parse-back is exact.
// summary.json: config echo, the audit, the constant estimates, wall clock.
// Every field except wall_clock_seconds is deterministic for a fixed input.
inline void emit_metrics(const std::vector<IterationRecord>& records,
                         const TheoremAudit& audit,
                         const AssumptionEstimates& estimates,
                         const std::string& dir,
                         const SummaryInfo& info = {}) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("emit_metrics: cannot create '" + dir +
                             "': " + ec.message());

  const std::string csv_path = (fs::path(dir) / "metrics.csv").string();
  {
    std::ofstream csv(csv_path, std::ios::binary);  // '\n' on every platform
    if (!csv) throw std::runtime_error("emit_metrics: cannot open " + csv_path);
    csv << "t,objective_F,gap_upper,residual_phi,v_norm_sq,inner_iters,alpha_t\n";
    for (const auto& r : records) {
      csv << r.t << ',' << detail::fmt_g17(r.objective_F) << ','
          << detail::fmt_g17(r.gap_upper) << ','
          << detail::fmt_g17(r.residual_phi) << ','
          << detail::fmt_g17(r.v_norm_sq) << ',' << r.inner_iters << ','
          << detail::fmt_g17(r.alpha_t) << '\n';
    }
    csv.flush();
    if (!csv) throw std::runtime_error("emit_metrics: write failed: " + csv_path);
  }

  nlohmann::ordered_json doc;
  doc["config"] = info.config_echo;
  doc["algorithm"] = info.algorithm;
  doc["iterations_recorded"] = records.size();
  doc["completed"] = info.completed;
  doc["certificates_ok"] = info.certificates_ok;
  doc["abort_reason"] = info.abort_reason;
  if (info.init_distance.has_value())
    doc["init_distance"] = *info.init_distance;
  else
    doc["init_distance"] = nullptr;
  doc["audit"] = {
      {"applicable", audit.applicable},
      {"lhs_avg_gap", audit.lhs_avg_gap},
      {"rhs_bound", std::isfinite(audit.rhs_bound)
                        ? nlohmann::ordered_json(audit.rhs_bound)
                        : nlohmann::ordered_json(nullptr)},
      {"satisfied", audit.satisfied},
  };
  doc["estimates"] = {
      {"hessian_bound_G", estimates.hessian_bound_G},
      {"jacobian_bound_H", estimates.jacobian_bound_H},
      {"direction_bound_V", estimates.direction_bound_V},
  };
  doc["wall_clock_seconds"] = info.wall_clock_seconds;

  const std::string json_path = (fs::path(dir) / "summary.json").string();
  std::ofstream js(json_path, std::ios::binary);
  if (!js) throw std::runtime_error("emit_metrics: cannot open " + json_path);
  js << doc.dump(2) << '\n';
  js.flush();
  if (!js) throw std::runtime_error("emit_metrics: write failed: " + json_path);
}

// Doubles w until gap_upper(w) >= min_gap. Works whenever some parameter
// scale direction grows the outputs (true for the nets here: the last layer
// is affine in its weights). Gives up after 60 doublings.
inline WeightVector ensure_min_gap(const MlpSpec& spec, const Dataset& data,
                                   WeightVector w, double min_gap) {
  for (int k = 0; k < 60; ++k) {
    if (gap_upper(spec, data, w) >= min_gap) return w;
    w *= 2.0;
  }
  if (gap_upper(spec, data, w) >= min_gap) return w;
  throw std::runtime_error(
      "ensure_min_gap: could not reach the requested initial gap " +
      std::to_string(min_gap));
}

struct ExperimentResult {
  Dataset data;
  WeightVector w0;
  RunResult run;
  TheoremAudit audit;  // default (not applicable) when the run aborted
  double wall_clock_seconds = 0.0;
};

// Full pipeline behind `composite-opt run`: dataset, seeded init (optionally
// rescaled to a requested starting gap), training, audit, metric files.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       bool write_output = true) {
  const auto t_start = std::chrono::steady_clock::now();

  ExperimentResult out;
  out.data = load_dataset(cfg);
  if (out.data.input_dim != cfg.network.input_dim() ||
      out.data.output_dim != cfg.network.output_dim())
    throw std::runtime_error(
        "experiment: dataset is " + std::to_string(out.data.input_dim) +
        " -> " + std::to_string(out.data.output_dim) + " but the network is " +
        std::to_string(cfg.network.input_dim()) + " -> " +
        std::to_string(cfg.network.output_dim()));

  out.w0 = init_weights(cfg.network);
  if (cfg.init_min_gap > 0.0)
    out.w0 = ensure_min_gap(cfg.network, out.data, out.w0, cfg.init_min_gap);

  out.run = copt::run(cfg.train, cfg.network, out.data, out.w0);

  if (out.run.completed && out.run.init_distance.has_value()) {
    out.audit = audit_theorem(cfg.train, out.run.records,
                              out.run.trajectory_estimates,
                              out.run.init_distance,
                              cfg.network.output_dim());
  } else if (!out.run.records.empty()) {
    double sum = 0.0;
    for (const auto& r : out.run.records) sum += r.gap_upper;
    out.audit.lhs_avg_gap = sum / out.run.records.size();
  }

  out.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();

  if (write_output) {
    SummaryInfo info;
    info.config_echo = format_config(cfg);
    info.algorithm = cfg.train.algorithm == Algorithm::ClosedForm
                         ? "closed_form"
                         : "inner_gd";
    info.wall_clock_seconds = out.wall_clock_seconds;
    info.completed = out.run.completed;
    info.certificates_ok = out.run.certificates_ok;
    info.abort_reason = out.run.abort_reason;
    info.init_distance = out.run.init_distance;
    emit_metrics(out.run.records, out.audit, out.run.trajectory_estimates,
                 cfg.output_dir, info);
  }
  return out;
}

}  // namespace copt
