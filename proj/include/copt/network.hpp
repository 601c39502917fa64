#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "copt/dataset.hpp"
#include "copt/parallel.hpp"
#include "copt/rng.hpp"
#include "copt/spectral.hpp"

namespace copt {

// Activations are restricted to twice continuously differentiable choices;
// ReLU is excluded by construction so the second-order remainder bound of
// the update analysis holds exactly.
enum class Activation { Identity, Sigmoid, Tanh, Softplus };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Softplus: return "softplus";
  }
  return "?";
}

inline double act_value(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::Tanh: return std::tanh(x);
    case Activation::Softplus:
      // max(x,0) + log1p(exp(-|x|)) is overflow-safe on both tails.
      return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  }
  return x;
}

inline double act_slope(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Softplus: return 1.0 / (1.0 + std::exp(-x));
  }
  return 1.0;
}

// Fully connected net
//   h(w;x) = W_L^T s_(L-1)( ... s_1(W_1^T x + b_1) ... ) + b_L
// with W_l of shape n_(l-1) x n_l (applied transposed) and the last layer
// affine. layer_sizes = [n_0 = m, n_1, ..., n_L = c]; activations has one
// entry per hidden transition (L-1 of them).
//
// with_biases exists for the two-layer linear construction used by the
// initialization-scaling experiment, which is bias-free; everything else
// runs with biases on.
struct MlpSpec {
  std::vector<int> layer_sizes;
  std::vector<Activation> activations;
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  bool with_biases = true;

  int depth() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }

  int param_count() const {
    int d = 0;
    for (int l = 0; l < depth(); ++l) {
      d += layer_sizes[l] * layer_sizes[l + 1];
      if (with_biases) d += layer_sizes[l + 1];
    }
    return d;
  }

  void validate() const {
    if (depth() < 1)
      throw std::invalid_argument("MlpSpec: need at least one layer");
    for (int s : layer_sizes)
      if (s < 1) throw std::invalid_argument("MlpSpec: layer sizes must be >= 1");
    if (static_cast<int>(activations.size()) != depth() - 1)
      throw std::invalid_argument(
          "MlpSpec: expected " + std::to_string(depth() - 1) +
          " activations, got " + std::to_string(activations.size()));
  }
};

// Flattened parameters. Layout: for each layer in order, the weight matrix
// in column-major order (all of column 1, then column 2, ...) followed by
// its bias vector (omitted when biases are disabled). vectorize/devectorize
// round-trip bit-exactly because both sides are straight memcpy against
// Eigen's own column-major storage.
using WeightVector = Eigen::VectorXd;

struct LayerParams {
  Eigen::MatrixXd W;  // n_(l-1) x n_l
  Eigen::VectorXd b;  // n_l (zero when biases are disabled)
};

inline WeightVector vectorize(const MlpSpec& spec,
                              const std::vector<LayerParams>& params) {
  spec.validate();
  if (static_cast<int>(params.size()) != spec.depth())
    throw std::invalid_argument("vectorize: wrong number of layers");
  WeightVector w(spec.param_count());
  int off = 0;
  for (int l = 0; l < spec.depth(); ++l) {
    const auto& p = params[l];
    if (p.W.rows() != spec.layer_sizes[l] || p.W.cols() != spec.layer_sizes[l + 1])
      throw std::invalid_argument("vectorize: layer " + std::to_string(l) +
                                  " weight shape mismatch");
    if (p.b.size() != spec.layer_sizes[l + 1])
      throw std::invalid_argument("vectorize: layer " + std::to_string(l) +
                                  " bias length mismatch");
    const int wn = static_cast<int>(p.W.size());
    std::memcpy(w.data() + off, p.W.data(), sizeof(double) * wn);
    off += wn;
    if (spec.with_biases) {
      std::memcpy(w.data() + off, p.b.data(), sizeof(double) * p.b.size());
      off += static_cast<int>(p.b.size());
    } else if (!p.b.isZero(0.0)) {
      throw std::invalid_argument("vectorize: nonzero bias on a bias-free net");
    }
  }
  return w;
}

inline std::vector<LayerParams> devectorize(const MlpSpec& spec,
                                            const WeightVector& w) {
  spec.validate();
  if (w.size() != spec.param_count())
    throw std::invalid_argument("devectorize: weight vector has length " +
                                std::to_string(w.size()) + ", expected " +
                                std::to_string(spec.param_count()));
  std::vector<LayerParams> params(spec.depth());
  int off = 0;
  for (int l = 0; l < spec.depth(); ++l) {
    const int rows = spec.layer_sizes[l];
    const int cols = spec.layer_sizes[l + 1];
    params[l].W.resize(rows, cols);
    std::memcpy(params[l].W.data(), w.data() + off,
                sizeof(double) * rows * cols);
    off += rows * cols;
    if (spec.with_biases) {
      params[l].b.resize(cols);
      std::memcpy(params[l].b.data(), w.data() + off, sizeof(double) * cols);
      off += cols;
    } else {
      params[l].b = Eigen::VectorXd::Zero(cols);
    }
  }
  return params;
}

// Seeded Gaussian init: entries N(0, (init_scale/sqrt(fan_in))^2), biases
// zero. Filled in vectorized order so the draw sequence is the layout.
inline WeightVector init_weights(const MlpSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  WeightVector w = WeightVector::Zero(spec.param_count());
  int off = 0;
  for (int l = 0; l < spec.depth(); ++l) {
    const int rows = spec.layer_sizes[l];
    const int cols = spec.layer_sizes[l + 1];
    const double stddev = spec.init_scale / std::sqrt(static_cast<double>(rows));
    for (int k = 0; k < rows * cols; ++k) w[off + k] = stddev * rng.normal();
    off += rows * cols;
    if (spec.with_biases) off += cols;  // biases stay zero
  }
  return w;
}

namespace detail {

inline void check_forward_args(const MlpSpec& spec, const WeightVector& w,
                               const Eigen::VectorXd& x) {
  if (static_cast<int>(x.size()) != spec.input_dim())
    throw std::invalid_argument("forward: input has dimension " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(spec.input_dim()));
  if (w.size() != spec.param_count())
    throw std::invalid_argument("forward: weight vector length mismatch");
  if (!w.allFinite())
    throw std::invalid_argument("forward: weight vector has non-finite entries");
}

// Everything the backward pass needs: pre-activations z_l and
// post-activation outputs a_l per layer (a_l = z_l on the last layer).
struct ForwardTrace {
  std::vector<Eigen::VectorXd> pre;   // z_1 .. z_L
  std::vector<Eigen::VectorXd> post;  // a_0 = x, a_1 .. a_L
};

inline ForwardTrace forward_trace(const MlpSpec& spec,
                                  const std::vector<LayerParams>& params,
                                  const Eigen::VectorXd& x) {
  ForwardTrace tr;
  tr.pre.reserve(spec.depth());
  tr.post.reserve(spec.depth() + 1);
  tr.post.push_back(x);
  for (int l = 0; l < spec.depth(); ++l) {
    Eigen::VectorXd z = params[l].W.transpose() * tr.post.back() + params[l].b;
    tr.pre.push_back(z);
    if (l + 1 < spec.depth()) {
      Eigen::VectorXd a(z.size());
      for (int j = 0; j < z.size(); ++j)
        a[j] = act_value(spec.activations[l], z[j]);
      tr.post.push_back(std::move(a));
    } else {
      tr.post.push_back(std::move(z));
    }
  }
  return tr;
}

}  // namespace detail

inline Eigen::VectorXd forward(const MlpSpec& spec, const WeightVector& w,
                               const Eigen::VectorXd& x) {
  detail::check_forward_args(spec, w, x);
  const auto params = devectorize(spec, w);
  return detail::forward_trace(spec, params, x).post.back();
}

// Exact Jacobian dh/dw, one reverse sweep carrying all c seed rows at once.
// M starts as dh/dz_L = I and is pulled back layer by layer; at layer l the
// weight block for column q is M.col(q) * a_(l-1}^T because
// z_q = sum_p W_pq a_p + b_q.
inline Eigen::MatrixXd jacobian(const MlpSpec& spec, const WeightVector& w,
                                const Eigen::VectorXd& x) {
  detail::check_forward_args(spec, w, x);
  const auto params = devectorize(spec, w);
  const auto tr = detail::forward_trace(spec, params, x);
  const int c = spec.output_dim();
  const int d = spec.param_count();

  // Block offsets of each layer inside the flattened vector.
  std::vector<int> offsets(spec.depth());
  {
    int off = 0;
    for (int l = 0; l < spec.depth(); ++l) {
      offsets[l] = off;
      off += spec.layer_sizes[l] * spec.layer_sizes[l + 1];
      if (spec.with_biases) off += spec.layer_sizes[l + 1];
    }
  }

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(c, d);
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(c, c);  // dh/dz_l, l = L
  for (int l = spec.depth() - 1; l >= 0; --l) {
    const int rows = spec.layer_sizes[l];      // n_(l-1)
    const int cols = spec.layer_sizes[l + 1];  // n_l
    const Eigen::VectorXd& a_prev = tr.post[l];
    for (int q = 0; q < cols; ++q)
      J.block(0, offsets[l] + q * rows, c, rows) = M.col(q) * a_prev.transpose();
    if (spec.with_biases) J.block(0, offsets[l] + rows * cols, c, cols) = M;

    if (l > 0) {
      // Pull back through z_l = W_l^T a_(l-1) and a_(l-1) = s(z_(l-1)).
      M = (M * params[l].W.transpose()).eval();
      const Eigen::VectorXd& z_prev = tr.pre[l - 1];
      for (int p = 0; p < rows; ++p)
        M.col(p) *= act_slope(spec.activations[l - 1], z_prev[p]);
    }
  }
  return J;
}

// Per-sample Jacobians at one weight vector. eval_tag fingerprints the
// weights (FNV-1a over the raw bytes) so consumers can assert a stack and
// a weight vector belong together.
struct JacobianStack {
  std::vector<Eigen::MatrixXd> per_sample;
  std::uint64_t eval_tag = 0;
};

inline std::uint64_t weight_tag(const WeightVector& w) {
  std::uint64_t h = 1469598103934665603ull;
  const unsigned char* bytes = reinterpret_cast<const unsigned char*>(w.data());
  for (std::size_t i = 0; i < sizeof(double) * w.size(); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline JacobianStack jacobian_stack(const MlpSpec& spec, const WeightVector& w,
                                    const Dataset& data) {
  JacobianStack stack;
  stack.eval_tag = weight_tag(w);
  stack.per_sample.resize(data.size());
  parallel_for(data.size(), [&](int i) {
    stack.per_sample[i] = jacobian(spec, w, data.inputs[i]);
  });
  return stack;
}

// Second-order remainder of the linearized update:
//   e = h(w - eta*v; x) - h(w; x) + eta * J(w) * v.
// Zero exactly on purely linear nets and for eta = 0.
inline Eigen::VectorXd taylor_residual(const MlpSpec& spec,
                                       const WeightVector& w,
                                       const Eigen::VectorXd& v, double eta,
                                       const Eigen::VectorXd& x) {
  if (v.size() != w.size())
    throw std::invalid_argument("taylor_residual: v/w length mismatch");
  const Eigen::VectorXd stepped = forward(spec, w - eta * v, x);
  const Eigen::VectorXd base = forward(spec, w, x);
  return stepped - base + eta * (jacobian(spec, w, x) * v);
}

// Empirical constants behind the boundedness assumptions. All three are
// estimates along supplied probe points, clearly not certified suprema:
// the true bounds range over all of R^d.
struct AssumptionEstimates {
  double hessian_bound_G = 0.0;   // max spectral norm of d2 h_j / dw2
  double jacobian_bound_H = 0.0;  // convention ||H_i|| <= H / sqrt(eps)
  double direction_bound_V = 0.0; // filled from the subproblem diagnostic
};

// G: for each probe weight and each (sample, output) pair (capped), power
// iteration (30 steps) on the matrix-free central-difference Hessian of
// h_j(.; x_i). H: sqrt(eps) * max_i ||H_i||_2 over the same probes.
// V is merged in by callers that have solved a subproblem.
inline AssumptionEstimates estimate_constants(
    const MlpSpec& spec, const std::vector<WeightVector>& w_samples,
    const Dataset& data, double eps, int probe_cap = 8, int pair_cap = 64) {
  if (w_samples.empty())
    throw std::invalid_argument("estimate_constants: no probe weights");
  if (eps <= 0.0)
    throw std::invalid_argument("estimate_constants: eps must be positive");
  spec.validate();

  // Thin the probe list to the cap, keeping the endpoints.
  std::vector<const WeightVector*> probes;
  const int np = static_cast<int>(w_samples.size());
  if (np <= probe_cap) {
    for (const auto& w : w_samples) probes.push_back(&w);
  } else {
    for (int k = 0; k < probe_cap; ++k) {
      const int idx = static_cast<int>(
          std::llround(static_cast<double>(k) * (np - 1) / (probe_cap - 1)));
      probes.push_back(&w_samples[idx]);
    }
  }

  const int d = spec.param_count();
  const int c = spec.output_dim();
  double G = 0.0;
  double max_jac_norm = 0.0;

  for (const WeightVector* wp : probes) {
    const WeightVector& w = *wp;
    if (w.size() != d)
      throw std::invalid_argument("estimate_constants: probe length mismatch");
    const double fd_step = 1e-5 * (1.0 + w.norm());

    int pairs = 0;
    for (int i = 0; i < data.size() && pairs < pair_cap; ++i) {
      const Eigen::VectorXd& x = data.inputs[i];
      const Eigen::MatrixXd J = jacobian(spec, w, x);
      if (!J.allFinite())
        throw std::runtime_error(
            "estimate_constants: non-finite Jacobian at sample " +
            std::to_string(i));
      max_jac_norm = std::max(max_jac_norm, spectral_norm(J));

      for (int j = 0; j < c && pairs < pair_cap; ++j, ++pairs) {
        // Matrix-free Hessian of h_j: apply(u) ~ (grad(w+du) - grad(w-du))/2d
        // where grad is row j of the Jacobian.
        const auto apply = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
          const Eigen::MatrixXd Jp = jacobian(spec, w + fd_step * u, x);
          const Eigen::MatrixXd Jm = jacobian(spec, w - fd_step * u, x);
          return (Jp.row(j) - Jm.row(j)).transpose() / (2.0 * fd_step);
        };
        const double norm = power_iteration_sym(apply, d, 30);
        if (!std::isfinite(norm))
          throw std::runtime_error(
              "estimate_constants: non-finite Hessian estimate at sample " +
              std::to_string(i) + ", output " + std::to_string(j));
        G = std::max(G, norm);
      }
    }
  }

  AssumptionEstimates est;
  est.hessian_bound_G = G;
  est.jacobian_bound_H = std::sqrt(eps) * max_jac_norm;
  est.direction_bound_V = 0.0;
  return est;
}

}  // namespace copt
