// composite-opt: train a small MLP through the regularized per-iteration
// least-squares reformulation, inspect the assumptions behind the method's
// guarantee, or run plain gradient-descent baselines for comparison.
//
// Subcommands:
//   run      --config <file>   full experiment; writes metrics.csv + summary.json
//   check    --config <file>   constant estimates + stacked-system feasibility, no training
//   qscale   --eps a,b,c --seed N   initialization-scaling table on the two-point set
//   baseline --config <file>   full-batch GD / SGD with the same metric output

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "copt/copt.hpp"

namespace {

int cmd_run(const std::string& config_path) {
  const copt::ExperimentConfig cfg = copt::parse_config_file(config_path);
  const copt::ExperimentResult result = copt::run_experiment(cfg);
  const auto& run = result.run;

  std::printf("iterations: %zu of %d\n", run.records.size(),
              cfg.train.iterations());
  if (!run.records.empty()) {
    std::printf("gap_upper:  first %.6g, last %.6g\n",
                run.records.front().gap_upper, run.records.back().gap_upper);
  }
  if (result.audit.applicable) {
    std::printf("audit:      avg gap %.6g vs bound %.6g -> %s\n",
                result.audit.lhs_avg_gap, result.audit.rhs_bound,
                result.audit.satisfied ? "satisfied" : "VIOLATED");
  } else {
    std::printf("audit:      not applicable\n");
  }
  if (!run.completed)
    std::printf("aborted:    %s\n", run.abort_reason.c_str());
  std::printf("output:     %s/metrics.csv, %s/summary.json\n",
              cfg.output_dir.c_str(), cfg.output_dir.c_str());

  const bool ok =
      run.completed && (cfg.train.algorithm != copt::Algorithm::InnerGD ||
                        run.certificates_ok);
  return ok ? 0 : 1;
}

int cmd_check(const std::string& config_path) {
  const copt::ExperimentConfig cfg = copt::parse_config_file(config_path);
  const copt::Dataset data = copt::load_dataset(cfg);
  copt::WeightVector w0 = copt::init_weights(cfg.network);
  if (cfg.init_min_gap > 0.0)
    w0 = copt::ensure_min_gap(cfg.network, data, w0, cfg.init_min_gap);

  const copt::AssumptionEstimates est =
      copt::estimate_constants(cfg.network, {w0}, data, cfg.train.eps);
  const std::vector<double> alphas(data.size(),
                                   copt::lr_schedule(cfg.train, 0));
  const copt::StackedSystem sys = copt::interpolation_feasibility(
      cfg.network, w0, data, cfg.train.step(), alphas);

  std::printf("samples:          %d (inputs %d -> outputs %d)\n", data.size(),
              data.input_dim, data.output_dim);
  std::printf("parameters:       %d\n", cfg.network.param_count());
  std::printf("hessian_bound_G:  %.6g\n", est.hessian_bound_G);
  std::printf("jacobian_bound_H: %.6g\n", est.jacobian_bound_H);
  std::printf("stacked system:   %ld x %ld, rank %d of %ld\n",
              static_cast<long>(sys.A_stack.rows()),
              static_cast<long>(sys.A_stack.cols()), sys.numeric_rank,
              static_cast<long>(sys.A_stack.rows()));
  std::printf("ls residual:      %.6g (|b| = %.6g)\n", sys.residual_min,
              sys.b_stack.norm());
  if (sys.numeric_rank < sys.A_stack.rows())
    std::printf("warning: stacked system is rank deficient; a direction "
                "matching every sample may not exist at these weights\n");
  return 0;
}

int cmd_qscale(const std::vector<double>& eps_list, std::uint64_t seed) {
  const auto rows = copt::q_norm_scaling_experiment(eps_list, seed);
  std::printf("%10s %6s %14s %10s\n", "eps", "m", "q_norm", "ratio");
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k == 0)
      std::printf("%10.4g %6d %14.8g %10s\n", rows[k].eps, rows[k].m,
                  rows[k].q_norm, "-");
    else
      std::printf("%10.4g %6d %14.8g %10.6g\n", rows[k].eps, rows[k].m,
                  rows[k].q_norm, rows[k].q_norm / rows[k - 1].q_norm);
  }
  return 0;
}

int cmd_baseline(const std::string& config_path) {
  const copt::ExperimentConfig cfg = copt::parse_config_file(config_path);
  if (cfg.baseline == copt::BaselineKind::None)
    throw std::runtime_error(config_path + ": no baseline.kind configured");

  const copt::Dataset data = copt::load_dataset(cfg);
  copt::WeightVector w0 = copt::init_weights(cfg.network);
  if (cfg.init_min_gap > 0.0)
    w0 = copt::ensure_min_gap(cfg.network, data, w0, cfg.init_min_gap);

  const auto t_start = std::chrono::steady_clock::now();
  const copt::BaselineResult result = copt::run_baseline(cfg, data, w0);

  copt::SummaryInfo info;
  info.config_echo = copt::format_config(cfg);
  info.algorithm = cfg.baseline == copt::BaselineKind::FullGradientDescent
                       ? "baseline_full_gd"
                       : "baseline_sgd";
  info.completed = !result.diverged;
  info.abort_reason = result.diverged ? "objective diverged past 1e12" : "";
  info.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  copt::emit_metrics(result.records, copt::TheoremAudit{},
                     copt::AssumptionEstimates{}, cfg.output_dir, info);

  std::printf("iterations: %zu of %d%s\n", result.records.size(),
              cfg.baseline_iters, result.diverged ? " (diverged)" : "");
  if (!result.records.empty())
    std::printf("gap_upper:  first %.6g, last %.6g\n",
                result.records.front().gap_upper,
                result.records.back().gap_upper);
  std::printf("output:     %s/metrics.csv, %s/summary.json\n",
              cfg.output_dir.c_str(), cfg.output_dir.c_str());
  return result.diverged ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regularized least-squares training for small MLPs"};
  app.require_subcommand(1);

  std::string run_config, check_config, baseline_config;
  auto* run_cmd = app.add_subcommand("run", "Train per a config file");
  run_cmd->add_option("--config", run_config, "experiment config file")
      ->required();
  auto* check_cmd =
      app.add_subcommand("check", "Estimate constants; no training");
  check_cmd->add_option("--config", check_config, "experiment config file")
      ->required();
  auto* baseline_cmd =
      app.add_subcommand("baseline", "Plain GD/SGD with the same metrics");
  baseline_cmd->add_option("--config", baseline_config, "experiment config file")
      ->required();

  std::vector<double> qscale_eps{0.1, 0.05, 0.025};
  std::uint64_t qscale_seed = 0;
  bool qscale_seed_set = false;
  auto* qscale_cmd = app.add_subcommand(
      "qscale", "Initialization-scaling table over a descending eps list");
  qscale_cmd->add_option("--eps", qscale_eps, "descending eps values")
      ->delimiter(',');
  qscale_cmd->add_option("--seed", qscale_seed, "base-weight seed")
      ->each([&](const std::string&) { qscale_seed_set = true; });

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(run_config);
    if (check_cmd->parsed()) return cmd_check(check_config);
    if (baseline_cmd->parsed()) return cmd_baseline(baseline_config);
    if (qscale_cmd->parsed()) {
      if (!qscale_seed_set)
        throw std::runtime_error(
            "qscale: --seed is required (seeds are always explicit)");
      return cmd_qscale(qscale_eps, qscale_seed);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
