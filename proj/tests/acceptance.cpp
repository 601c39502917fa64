// Acceptance gate: ten numbered end-to-end checks, each printing exactly one
// "criterion N: PASS/FAIL (...)" line. The exit code is the number of
// failures. Run with no arguments for all ten, or pass criterion numbers to
// run a subset. Every tolerance is pinned here, in code.

#include <unistd.h>

#include <Eigen/LU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "copt/copt.hpp"
#include "helpers.hpp"

using namespace copt;

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

// Collects the first failure reason; later checks still run so a criterion
// always finishes its measurements.
struct Check {
  bool ok = true;
  std::string why;
  void expect(bool cond, const std::string& msg) {
    if (!cond && ok) {
      ok = false;
      why = msg;
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. Analytic Jacobian vs central finite differences (step 1e-5) on 20
//    randomized nets covering every activation, d <= 300 each. Elementwise
//    error |J - J_fd| / max(1, |J_fd|) < 1e-5 and Frobenius-relative < 1e-5.
//    Under 10 s.
bool criterion1(std::string& detail) {
  Stopwatch clock;
  Check c;
  const std::vector<std::vector<int>> shapes = {
      {10, 16, 4, 4}, {10, 12, 8, 4}, {3, 5, 2}, {6, 10, 4, 3}, {2, 7, 7, 1}};
  const Activation acts[] = {Activation::Identity, Activation::Sigmoid,
                             Activation::Tanh, Activation::Softplus};
  double worst_elem = 0.0;
  double worst_frob = 0.0;
  for (int k = 0; k < 20; ++k) {
    MlpSpec spec;
    spec.layer_sizes = shapes[k % shapes.size()];
    spec.activations.assign(spec.layer_sizes.size() - 2, acts[k % 4]);
    spec.seed = 1000 + k;
    c.expect(spec.param_count() <= 300,
             "net has d = " + std::to_string(spec.param_count()) + " > 300");
    const WeightVector w = init_weights(spec);
    Rng rng(2000 + k);
    const Eigen::VectorXd x = test::rand_vec(rng, spec.input_dim());

    const Eigen::MatrixXd J = jacobian(spec, w, x);
    const Eigen::MatrixXd Jfd = test::fd_jacobian(spec, w, x, 1e-5);
    for (int i = 0; i < J.rows(); ++i)
      for (int j = 0; j < J.cols(); ++j)
        worst_elem =
            std::max(worst_elem, std::abs(J(i, j) - Jfd(i, j)) /
                                     std::max(1.0, std::abs(Jfd(i, j))));
    worst_frob = std::max(worst_frob, (J - Jfd).norm() / Jfd.norm());
  }
  c.expect(worst_elem < 1e-5, "elementwise error " + fmt(worst_elem));
  c.expect(worst_frob < 1e-5, "frobenius error " + fmt(worst_frob));
  const double secs = clock.seconds();
  c.expect(secs < 10.0, "over the 10 s budget");
  detail = c.ok ? "20 nets, elem " + fmt(worst_elem) + ", frob " +
                      fmt(worst_frob) + ", " + fmt(secs) + " s"
                : c.why;
  return c.ok;
}

// ---------------------------------------------------------------------------
// 2. Loss properties on 1000 random trials per loss: chord convexity within
//    1e-10, gradient-Lipschitz ratio <= 1 + 1e-8, bounded cross-entropy
//    gradient (||g||^2 <= c), and the self-bounding inequality
//    ||g||^2 <= 2 L (phi - phi*). Under 5 s.
bool criterion2(std::string& detail) {
  Stopwatch clock;
  Check c;
  Rng rng(3000);
  const int cs[] = {2, 3, 5, 10};
  const double scales[] = {1.0, 5.0, 20.0};

  for (int trial = 0; trial < 1000; ++trial) {
    const int dim = cs[trial % 4];
    const double scale = scales[trial % 3];
    const LossKind sq = LossKind::squared(test::rand_vec(rng, dim, scale));
    const LossKind ce = LossKind::cross_entropy(trial % dim, dim);

    for (const LossKind& kind : {sq, ce}) {
      const Eigen::VectorXd z1 = test::rand_vec(rng, dim, scale);
      const Eigen::VectorXd z2 = test::rand_vec(rng, dim, scale);
      const double lam = rng.uniform();

      const double chord = lam * loss_value(kind, z1) +
                           (1.0 - lam) * loss_value(kind, z2);
      const double mid = loss_value(kind, lam * z1 + (1.0 - lam) * z2);
      c.expect(mid <= chord + 1e-10, "convexity violated by " +
                                         fmt(mid - chord) + " at trial " +
                                         std::to_string(trial));

      const double dz = (z1 - z2).norm();
      if (dz >= 1e-6) {
        const double dg = (loss_grad(kind, z1) - loss_grad(kind, z2)).norm();
        c.expect(dg <= (1.0 + 1e-8) * dz,
                 "gradient ratio " + fmt(dg / dz) + " at trial " +
                     std::to_string(trial));
      }

      const double phi = loss_value(kind, z1);
      const double g2 = loss_grad(kind, z1).squaredNorm();
      const double rhs = 2.0 * loss_meta(kind).smoothness * phi;
      c.expect(g2 <= rhs + 1e-10 * (1.0 + rhs),
               "self-bounding violated by " + fmt(g2 - rhs) + " at trial " +
                   std::to_string(trial));
      if (kind.family == LossFamily::CrossEntropy)
        c.expect(g2 <= dim, "cross-entropy gradient norm^2 " + fmt(g2) +
                                " exceeds c = " + std::to_string(dim));
    }
  }
  const double secs = clock.seconds();
  c.expect(secs < 5.0, "over the 5 s budget");
  detail = c.ok ? "1000 trials per loss, " + fmt(secs) + " s" : c.why;
  return c.ok;
}

// ---------------------------------------------------------------------------
// 3. Solver equivalence on 50 random instances (n <= 8, c <= 3, d <= 64,
//    eps in {0.3, 0.1, 0.03}): the certified iterate is within the inner
//    tolerance of the closed form, the closed form satisfies the normal
//    equations to 1e-10 relative, and matches a dense-inverse oracle to
//    1e-9. Under 20 s.
bool criterion3(std::string& detail) {
  Stopwatch clock;
  Check c;
  const double eps_grid[] = {0.3, 0.1, 0.03};
  Rng rng(4000);
  long long total_inner = 0;

  for (int k = 0; k < 50; ++k) {
    const double eps = eps_grid[k % 3];
    const int n = 1 + static_cast<int>(rng.index(8));
    const int cc = 1 + static_cast<int>(rng.index(3));
    const int d = 4 + static_cast<int>(rng.index(61));  // 4..64

    SubproblemInput in;
    in.eta = 0.7 * std::sqrt(eps);
    in.reg = eps * eps;
    for (int i = 0; i < n; ++i) {
      in.jacobians.per_sample.push_back(test::rand_mat(rng, cc, d));
      in.grads.push_back(test::rand_vec(rng, cc));
      in.alphas.push_back(0.05 + 0.25 * rng.uniform());
    }

    const SubproblemSystem sys = assemble(in);
    const Eigen::VectorXd v_cf = solve_closed_form(sys);

    const Eigen::VectorXd v_inv = sys.A.inverse() * sys.b;
    c.expect((v_cf - v_inv).norm() <= 1e-9,
             "dense-inverse gap " + fmt((v_cf - v_inv).norm()) +
                 " at instance " + std::to_string(k));
    const double resid = (sys.A * v_cf - sys.b).norm();
    const double allow = 1e-10 * (sys.A.norm() * v_cf.norm() + sys.b.norm());
    c.expect(resid <= allow, "normal-equation residual " + fmt(resid) +
                                 " at instance " + std::to_string(k));

    auto [v_gd, cert] = solve_inner_gd(in, sys, eps, 2000000);
    total_inner += cert.iterations;
    c.expect(cert.satisfied,
             "certificate unsatisfied at instance " + std::to_string(k));
    c.expect((v_gd - v_cf).norm() <= eps,
             "solver gap " + fmt((v_gd - v_cf).norm()) + " > eps at instance " +
                 std::to_string(k));
  }
  const double secs = clock.seconds();
  c.expect(secs < 20.0, "over the 20 s budget");
  detail = c.ok ? "50 instances, " + std::to_string(total_inner) +
                      " inner steps, " + fmt(secs) + " s"
                : c.why;
  return c.ok;
}

// ---------------------------------------------------------------------------
// 4. Linearization residual bound on 100 random (w, v, eta) triples over
//    sigmoid nets: every component obeys |e_ij| <= eta^2/2 ||v||^2 G + 1e-9
//    with G estimated along the step segment. Parameter-affine (single
//    layer) nets: residual below 1e-13 always (pure rounding noise), and
//    bitwise zero at eta = 0.
bool criterion4(std::string& detail) {
  Stopwatch clock;
  Check c;
  const std::vector<std::vector<int>> shapes = {{2, 6, 2}, {3, 5, 5, 2},
                                                {4, 8, 3}};
  const double etas[] = {0.3, 0.1, 0.03};
  double worst_margin = -1e300;  // residual minus bound, most adverse triple

  for (int k = 0; k < 100; ++k) {
    MlpSpec spec;
    spec.layer_sizes = shapes[k % shapes.size()];
    spec.activations.assign(spec.layer_sizes.size() - 2, Activation::Sigmoid);
    spec.seed = 5000 + k;
    const WeightVector w = init_weights(spec);
    Rng rng(6000 + k);
    const double eta = etas[k % 3];
    const Eigen::VectorXd v =
        test::rand_vec(rng, spec.param_count(), 0.5 + rng.uniform());

    // Curvature estimated along the actual step segment [w - eta v, w].
    std::vector<WeightVector> probes;
    for (int p = 0; p < 8; ++p)
      probes.push_back(w - (eta * p / 7.0) * v);
    Dataset data;
    data.input_dim = spec.input_dim();
    data.output_dim = spec.output_dim();
    for (int i = 0; i < 3; ++i) {
      data.inputs.push_back(test::rand_vec(rng, spec.input_dim()));
      data.losses.push_back(
          LossKind::squared(Eigen::VectorXd::Zero(spec.output_dim())));
    }
    const AssumptionEstimates est = estimate_constants(spec, probes, data, 0.1);
    const double cap =
        0.5 * eta * eta * v.squaredNorm() * est.hessian_bound_G + 1e-9;

    for (int i = 0; i < data.size(); ++i) {
      const double r =
          taylor_residual(spec, w, v, eta, data.inputs[i]).lpNorm<Eigen::Infinity>();
      worst_margin = std::max(worst_margin, r - cap);
      c.expect(r <= cap, "residual " + fmt(r) + " above bound " + fmt(cap) +
                             " at triple " + std::to_string(k));
    }
  }

  // Parameter-affine case: a single layer makes h linear in w, so the
  // residual is pure floating-point reassociation noise.
  double worst_affine = 0.0;
  for (int k = 0; k < 100; ++k) {
    MlpSpec spec;
    spec.layer_sizes = {3, 2};
    spec.activations = {};
    spec.seed = 7000 + k;
    spec.with_biases = (k % 2 == 0);
    const WeightVector w = init_weights(spec);
    Rng rng(8000 + k);
    const Eigen::VectorXd v = test::rand_vec(rng, spec.param_count());
    const Eigen::VectorXd x = test::rand_vec(rng, 3);
    const double eta = etas[k % 3];

    const double r = taylor_residual(spec, w, v, eta, x).lpNorm<Eigen::Infinity>();
    worst_affine = std::max(worst_affine, r);
    c.expect(r <= 1e-13, "affine residual " + fmt(r) + " at triple " +
                             std::to_string(k));
    c.expect(taylor_residual(spec, w, v, 0.0, x).norm() == 0.0,
             "nonzero residual at eta = 0");
  }

  const double secs = clock.seconds();
  c.expect(secs < 10.0, "over the 10 s budget");
  detail = c.ok ? "100 sigmoid triples (worst slack " + fmt(-worst_margin) +
                      "), 100 affine triples (worst " + fmt(worst_affine) +
                      "), " + fmt(secs) + " s"
                : c.why;
  return c.ok;
}

// ---------------------------------------------------------------------------
// 5. Learning-rate cap over eps in {1, 0.5, 0.1, 0.05, 0.01} and beta in
//    {0.5, 1, 2}: every rate a T-iteration run consumes stays at or below
//    alpha / L_phi + 1e-12, and the real-exponent endpoint
//    alpha (1+eps)^(beta/eps) / e^beta obeys the same cap. Under 1 s.
bool criterion5(std::string& detail) {
  Stopwatch clock;
  Check c;
  const double alpha = 0.2;
  int checked = 0;
  for (double eps : {1.0, 0.5, 0.1, 0.05, 0.01}) {
    for (double beta : {0.5, 1.0, 2.0}) {
      TrainConfig cfg;
      cfg.eps = eps;
      cfg.beta = beta;
      cfg.alpha = alpha;
      for (int t = 0; t < cfg.iterations(); ++t) {
        c.expect(lr_schedule(cfg, t) <= alpha + 1e-12,
                 "rate above cap at eps " + fmt(eps) + ", beta " + fmt(beta) +
                     ", t " + std::to_string(t));
        ++checked;
      }
      const double endpoint =
          alpha * std::pow(1.0 + eps, beta / eps) / std::exp(beta);
      c.expect(endpoint <= alpha + 1e-12,
               "real-exponent endpoint above cap at eps " + fmt(eps) +
                   ", beta " + fmt(beta));
    }
  }
  const double secs = clock.seconds();
  c.expect(secs < 1.0, "over the 1 s budget");
  detail = c.ok ? std::to_string(checked) + " consumed rates, " + fmt(secs) +
                      " s"
                : c.why;
  return c.ok;
}

// ---------------------------------------------------------------------------
// Shared instance for criteria 6, 9 and 10: four Gaussian samples in R^4,
// two classes, a two-hidden-layer tanh net with d = 242, squared loss,
// eps = 0.05, beta = 2 (so T = 40), D = 1, alpha = 0.2, and the starting
// point rescaled to a gap of at least 0.5.
ExperimentConfig convergence_instance(Algorithm alg, const std::string& dir) {
  ExperimentConfig cfg;
  cfg.network.layer_sizes = {4, 12, 12, 2};
  cfg.network.activations = {Activation::Tanh, Activation::Tanh};
  cfg.network.seed = 20240;
  cfg.network.init_scale = 1.2;
  cfg.loss = LossFamily::SquaredLoss;
  cfg.train.eps = 0.05;
  cfg.train.beta = 2.0;
  cfg.train.alpha = 0.2;
  cfg.train.D = 1.0;
  cfg.train.algorithm = alg;
  cfg.source = DatasetSource::GaussianBlobs;
  cfg.data_n = 4;
  cfg.data_m = 4;
  cfg.data_c = 2;
  cfg.data_seed = 20241;
  cfg.init_min_gap = 0.5;
  cfg.output_dir = dir;
  return cfg;
}

std::string scratch_dir(const char* tag) {
  return (std::filesystem::temp_directory_path() /
          ("copt_accept_" + std::to_string(::getpid()) + "_" + tag))
      .string();
}

// 6. Desk-scale global convergence: the closed-form run takes the gap from
//    at least 0.5 down below 1e-2 within T = 40 and its audit holds with the
//    trajectory-estimated constants; the certified inner-GD run on the same
//    instance ends within 2x of the closed-form final gap with every
//    certificate satisfied. Under 60 s for both runs.
bool criterion6(std::string& detail) {
  Stopwatch clock;
  Check c;
  const ExperimentConfig cf = convergence_instance(Algorithm::ClosedForm, "");
  c.expect(cf.network.param_count() >= 200,
           "instance has d = " + std::to_string(cf.network.param_count()));

  const ExperimentResult a = run_experiment(cf, false);
  c.expect(a.run.completed, "closed-form run aborted: " + a.run.abort_reason);
  c.expect(a.run.records.size() == 40,
           std::to_string(a.run.records.size()) + " records");
  const double gap0 = a.run.records.empty() ? 0.0
                                            : a.run.records.front().gap_upper;
  c.expect(gap0 >= 0.5, "starting gap " + fmt(gap0) + " below 0.5");
  const double gap_cf = gap_upper(cf.network, a.data, a.run.weights);
  c.expect(gap_cf < 1e-2, "final gap " + fmt(gap_cf) + " not below 1e-2");
  c.expect(a.audit.applicable && a.audit.satisfied,
           "audit not satisfied: avg gap " + fmt(a.audit.lhs_avg_gap) +
               " vs bound " + fmt(a.audit.rhs_bound));

  const ExperimentConfig gd = convergence_instance(Algorithm::InnerGD, "");
  const ExperimentResult b = run_experiment(gd, false);
  c.expect(b.run.completed, "inner-GD run aborted: " + b.run.abort_reason);
  c.expect(b.run.certificates_ok, "inner-GD certificate failed");
  const double gap_gd = gap_upper(gd.network, b.data, b.run.weights);
  c.expect(gap_gd <= 2.0 * gap_cf, "inner-GD gap " + fmt(gap_gd) +
                                       " above 2x closed form " + fmt(gap_cf));

  const double secs = clock.seconds();
  c.expect(secs < 60.0, "over the 60 s budget");
  detail = c.ok ? "gap " + fmt(gap0) + " -> " + fmt(gap_cf) + " (closed), " +
                      fmt(gap_gd) + " (certified gd), audit " +
                      fmt(a.audit.lhs_avg_gap) + " <= " +
                      fmt(a.audit.rhs_bound) + ", " + fmt(secs) + " s"
                : c.why;
  return c.ok;
}

// ---------------------------------------------------------------------------
// 7. Fixed point: targets equal to the initial outputs give v = 0 at every
//    iteration and bit-identical weights after T steps, both algorithms.
bool criterion7(std::string& detail) {
  Check c;
  MlpSpec spec;
  spec.layer_sizes = {3, 6, 3};
  spec.activations = {Activation::Tanh};
  spec.seed = 9000;
  const WeightVector w0 = init_weights(spec);

  Dataset data;
  data.input_dim = 3;
  data.output_dim = 3;
  Rng rng(9001);
  for (int i = 0; i < 5; ++i) {
    data.inputs.push_back(test::rand_vec(rng, 3));
    data.losses.push_back(LossKind::squared(forward(spec, w0, data.inputs[i])));
  }

  TrainConfig cfg;
  cfg.eps = 0.1;
  cfg.beta = 1.0;
  cfg.alpha = 0.2;
  for (Algorithm alg : {Algorithm::ClosedForm, Algorithm::InnerGD}) {
    cfg.algorithm = alg;
    const RunResult res = run(cfg, spec, data, w0);
    c.expect(res.completed, "run aborted: " + res.abort_reason);
    c.expect(res.records.size() == 10, "record count");
    for (const auto& rec : res.records)
      c.expect(rec.v_norm_sq == 0.0,
               "nonzero direction at t " + std::to_string(rec.t));
    c.expect(std::memcmp(res.weights.data(), w0.data(),
                         sizeof(double) * w0.size()) == 0,
             "weights changed");
  }
  detail = c.ok ? "10 iterations per algorithm, weights bit-identical"
                : c.why;
  return c.ok;
}

// ---------------------------------------------------------------------------
// 8. Initialization-scaling experiment: for eps in {0.1, 0.05, 0.025} the
//    successive stacked-Jacobian norm ratios sit in [1.2, 1.7] (the exact
//    replication argument gives sqrt(2)). Under 5 s.
bool criterion8(std::string& detail) {
  Stopwatch clock;
  Check c;
  const auto rows = q_norm_scaling_experiment({0.1, 0.05, 0.025}, 8001);
  c.expect(rows.size() == 3, "row count");
  std::string ratios;
  for (size_t k = 0; k + 1 < rows.size(); ++k) {
    const double ratio = rows[k + 1].q_norm / rows[k].q_norm;
    ratios += (k ? ", " : "") + fmt(ratio);
    c.expect(ratio >= 1.2 && ratio <= 1.7,
             "ratio " + fmt(ratio) + " outside [1.2, 1.7]");
  }
  const double secs = clock.seconds();
  c.expect(secs < 5.0, "over the 5 s budget");
  detail = c.ok ? "ratios " + ratios + " (target 1.414), " + fmt(secs) + " s"
                : c.why;
  return c.ok;
}

// ---------------------------------------------------------------------------
// 9. Interpolation feasibility on the convergence instance: the stacked
//    n*c x d system at the rescaled starting point has full row rank 8 and
//    least-squares residual below 1e-8 ||b||.
bool criterion9(std::string& detail) {
  Check c;
  const ExperimentConfig cfg = convergence_instance(Algorithm::ClosedForm, "");
  const Dataset data = load_dataset(cfg);
  WeightVector w0 = init_weights(cfg.network);
  w0 = ensure_min_gap(cfg.network, data, w0, cfg.init_min_gap);

  const std::vector<double> alphas(data.size(), lr_schedule(cfg.train, 0));
  const StackedSystem sys = interpolation_feasibility(
      cfg.network, w0, data, cfg.train.step(), alphas);
  c.expect(sys.numeric_rank == 8,
           "rank " + std::to_string(sys.numeric_rank) + " != 8");
  c.expect(sys.residual_min < 1e-8 * sys.b_stack.norm(),
           "residual " + fmt(sys.residual_min) + " vs ||b|| " +
               fmt(sys.b_stack.norm()));
  detail = c.ok ? "rank 8, residual " + fmt(sys.residual_min) + " on ||b|| " +
                      fmt(sys.b_stack.norm())
                : c.why;
  return c.ok;
}

// ---------------------------------------------------------------------------
// 10. Determinism: the convergence run repeated under COMPOSITE_OPT_THREADS=1
//     produces byte-identical metrics.csv.
bool criterion10(std::string& detail) {
  Check c;
  const std::string dir_a = scratch_dir("det_a");
  const std::string dir_b = scratch_dir("det_b");

  run_experiment(convergence_instance(Algorithm::ClosedForm, dir_a));
  setenv("COMPOSITE_OPT_THREADS", "1", 1);
  run_experiment(convergence_instance(Algorithm::ClosedForm, dir_b));
  unsetenv("COMPOSITE_OPT_THREADS");

  const std::string a = slurp(dir_a + "/metrics.csv");
  const std::string b = slurp(dir_b + "/metrics.csv");
  c.expect(!a.empty(), "missing metrics.csv");
  c.expect(a == b, "metrics.csv differs between thread budgets");

  std::error_code ec;
  std::filesystem::remove_all(dir_a, ec);
  std::filesystem::remove_all(dir_b, ec);
  detail = c.ok ? std::to_string(a.size()) + " bytes, identical" : c.why;
  return c.ok;
}

}  // namespace

int main(int argc, char** argv) {
  bool (*criteria[])(std::string&) = {criterion1, criterion2, criterion3,
                                      criterion4, criterion5, criterion6,
                                      criterion7, criterion8, criterion9,
                                      criterion10};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > 10) {
      std::cerr << "usage: " << argv[0] << " [criterion numbers 1-10]\n";
      return 2;
    }
    wanted.insert(n);
  }

  int failures = 0;
  for (int n = 1; n <= 10; ++n) {
    if (!wanted.empty() && !wanted.count(n)) continue;
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[n - 1](detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::cout << "criterion " << n << ": " << (ok ? "PASS" : "FAIL") << " ("
              << detail << ")" << std::endl;
    if (!ok) ++failures;
  }
  return failures;
}
