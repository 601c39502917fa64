#pragma once

// Shared test utilities. The finite-difference routines here are the
// independent oracles the analytic code is checked against; they must stay
// dumb and direct (no reuse of the code under test).

#include <Eigen/Core>
#include <functional>

#include "copt/network.hpp"
#include "copt/rng.hpp"

namespace test {

inline Eigen::VectorXd rand_vec(copt::Rng& rng, int n, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

inline Eigen::MatrixXd rand_mat(copt::Rng& rng, int r, int c, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = scale * rng.normal();
  return m;
}

// Central-difference Jacobian of the network output, one coordinate at a
// time. O(d) forward pairs; intended for small nets only.
inline Eigen::MatrixXd fd_jacobian(const copt::MlpSpec& spec,
                                   const copt::WeightVector& w,
                                   const Eigen::VectorXd& x,
                                   double step = 1e-5) {
  const int d = spec.param_count();
  const int c = spec.output_dim();
  Eigen::MatrixXd J(c, d);
  copt::WeightVector wp = w, wm = w;
  for (int k = 0; k < d; ++k) {
    wp[k] = w[k] + step;
    wm[k] = w[k] - step;
    J.col(k) = (copt::forward(spec, wp, x) - copt::forward(spec, wm, x)) /
               (2.0 * step);
    wp[k] = w[k];
    wm[k] = w[k];
  }
  return J;
}

// Central-difference gradient of a scalar function of a vector.
inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& z, double step = 1e-6) {
  Eigen::VectorXd g(z.size());
  Eigen::VectorXd zp = z, zm = z;
  for (int k = 0; k < z.size(); ++k) {
    zp[k] = z[k] + step;
    zm[k] = z[k] - step;
    g[k] = (f(zp) - f(zm)) / (2.0 * step);
    zp[k] = z[k];
    zm[k] = z[k];
  }
  return g;
}

}  // namespace test
