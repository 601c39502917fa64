// Minimal library walkthrough: build a small tanh classifier on synthetic
// Gaussian blobs, train it with the closed-form inner solve, and print the
// per-iteration gap next to the guarantee's audited bound.

#include <cstdio>

#include "copt/copt.hpp"

int main() {
  copt::MlpSpec net;
  net.layer_sizes = {2, 16, 16, 2};
  net.activations = {copt::Activation::Tanh, copt::Activation::Tanh};
  net.seed = 11;

  const copt::Dataset data =
      copt::make_gaussian_blobs(6, 2, 2, 31, copt::LossFamily::SquaredLoss);

  copt::TrainConfig train;
  train.eps = 0.1;
  train.beta = 2.0;
  train.alpha = 0.2;
  train.algorithm = copt::Algorithm::ClosedForm;

  copt::WeightVector w0 = copt::init_weights(net);
  const copt::RunResult result = copt::run(train, net, data, w0);

  std::printf("%4s %14s %14s %12s\n", "t", "objective_F", "gap_upper", "|v|^2");
  for (const auto& rec : result.records)
    std::printf("%4d %14.8f %14.8f %12.6f\n", rec.t, rec.objective_F,
                rec.gap_upper, rec.v_norm_sq);

  if (result.init_distance.has_value()) {
    const copt::TheoremAudit audit =
        copt::audit_theorem(train, result.records, result.trajectory_estimates,
                            result.init_distance, net.output_dim());
    std::printf("\navg gap %.6g <= bound %.6g : %s\n", audit.lhs_avg_gap,
                audit.rhs_bound, audit.satisfied ? "yes" : "NO");
  }
  return result.completed ? 0 : 1;
}
