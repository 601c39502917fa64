#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "copt/losses.hpp"
#include "copt/network.hpp"
#include "copt/trainer.hpp"

namespace copt {

enum class DatasetSource { CsvFile, TwoPointAppendix, GaussianBlobs, RandomRegression };
enum class BaselineKind { None, FullGradientDescent, StochasticGD };

// Everything one experiment needs, resolved from a flat key-value file.
// Documented keys (see parse_config for the grammar):
//   network.layers        comma-separated sizes, input first   (required)
//   network.activations   comma list, one per hidden layer     (required if any)
//   network.seed          weight init seed                     (required)
//   network.init_scale    default 1.0
//   network.biases        true/false, default true
//   loss                  squared | cross_entropy              (required)
//   train.eps train.beta train.alpha                           (required)
//   train.D               default 1.0
//   train.algorithm       closed_form | inner_gd               (required)
//   train.inner_tol       default: eps
//   train.inner_max_iters default 200000
//   train.seed            default 0 (reserved; both algorithms are
//                         deterministic, so nothing consumes it yet)
//   dataset.source        csv | two_point | gaussian_blobs | random_regression
//   dataset.path          csv only                             (required for csv)
//   dataset.n dataset.m dataset.c                              (synthetic sources)
//   dataset.seed          required for the synthetic generators
//   dataset.x1 dataset.x2 two_point coordinates, default (1,0) and (0,1)
//   init.min_gap          rescale w0 until gap_upper >= this; 0 disables
//   output.dir            default "out"
//   baseline.kind         full_gd | sgd (optional)
//   baseline.step baseline.iters                               (required with kind)
//   baseline.batch baseline.seed                               (required for sgd)
struct ExperimentConfig {
  MlpSpec network;
  LossFamily loss = LossFamily::SquaredLoss;
  TrainConfig train;

  DatasetSource source = DatasetSource::TwoPointAppendix;
  std::string csv_path;
  int data_n = 0;
  int data_m = 0;
  int data_c = 0;
  std::uint64_t data_seed = 0;
  Eigen::Vector2d two_point_x1{1.0, 0.0};
  Eigen::Vector2d two_point_x2{0.0, 1.0};

  double init_min_gap = 0.0;
  std::string output_dir = "out";

  BaselineKind baseline = BaselineKind::None;
  double baseline_step = 0.0;
  int baseline_iters = 0;
  int baseline_batch = 0;
  std::uint64_t baseline_seed = 0;
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& path, int line,
                                      const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (!s.empty() && s.back() == ',') out.push_back("");
  return out;
}

// One parsed file: key -> (value, line). Lookup helpers convert on demand so
// every conversion failure can point at the offending line.
class KeyValues {
 public:
  KeyValues(std::string path) : path_(std::move(path)) {}

  void insert(const std::string& key, const std::string& value, int line) {
    if (values_.count(key))
      config_error(path_, line, "duplicate key '" + key + "'");
    values_[key] = {value, line};
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
      throw std::runtime_error(path_ + ": missing required key '" + key + "'");
    used_.insert(key);
    return it->second.first;
  }

  int line_of(const std::string& key) const {
    return values_.at(key).second;
  }

  double get_double(const std::string& key) const {
    return parse_number(key, raw(key));
  }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  long long get_int(const std::string& key) const {
    const std::string& v = raw(key);
    std::size_t pos = 0;
    long long r = 0;
    try {
      r = std::stoll(v, &pos);
    } catch (const std::exception&) {
      config_error(path_, line_of(key), "expected integer for '" + key + "', got '" + v + "'");
    }
    if (pos != v.size())
      config_error(path_, line_of(key), "trailing characters in integer '" + v + "'");
    return r;
  }
  long long get_int(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  std::uint64_t get_seed(const std::string& key) const {
    // Seeds must be spelled out: silent clock/default seeding is forbidden.
    if (!has(key))
      throw std::runtime_error(path_ + ": missing required key '" + key +
                               "' (seeds must be explicit)");
    const long long v = get_int(key);
    if (v < 0)
      config_error(path_, line_of(key), "seed '" + key + "' must be >= 0");
    return static_cast<std::uint64_t>(v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = raw(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    config_error(path_, line_of(key), "expected true/false for '" + key + "'");
  }

  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

  const std::string& path() const { return path_; }

 private:
  double parse_number(const std::string& key, const std::string& v) const {
    std::size_t pos = 0;
    double r = 0.0;
    try {
      r = std::stod(v, &pos);
    } catch (const std::exception&) {
      config_error(path_, line_of(key), "expected number for '" + key + "', got '" + v + "'");
    }
    if (pos != v.size())
      config_error(path_, line_of(key), "trailing characters in number '" + v + "'");
    return r;
  }

  std::string path_;
  std::unordered_map<std::string, std::pair<std::string, int>> values_;
  mutable std::unordered_set<std::string> used_;
};

inline Activation parse_activation(const std::string& name,
                                   const std::string& path, int line) {
  if (name == "identity") return Activation::Identity;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "softplus") return Activation::Softplus;
  config_error(path, line, "unknown activation '" + name + "'");
}

inline Eigen::Vector2d parse_point2(const KeyValues& kv, const std::string& key) {
  const auto parts = split_list(kv.raw(key));
  if (parts.size() != 2)
    config_error(kv.path(), kv.line_of(key), "'" + key + "' needs two coordinates");
  Eigen::Vector2d p;
  for (int i = 0; i < 2; ++i) {
    try {
      std::size_t pos = 0;
      p[i] = std::stod(parts[i], &pos);
      if (pos != parts[i].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      config_error(kv.path(), kv.line_of(key), "bad coordinate '" + parts[i] + "'");
    }
  }
  return p;
}

}  // namespace detail

// Flat `key = value` lines, '#' starts a comment (whole line or trailing),
// blank lines ignored. Unknown or duplicate keys are hard errors so a typo
// cannot silently fall back to a default.
inline ExperimentConfig parse_config(std::istream& in, const std::string& path) {
  detail::KeyValues kv(path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      detail::config_error(path, lineno, "expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) detail::config_error(path, lineno, "empty key");
    kv.insert(key, value, lineno);
  }

  ExperimentConfig cfg;

  // Network.
  {
    const auto parts = detail::split_list(kv.raw("network.layers"));
    if (parts.size() < 2)
      detail::config_error(path, kv.line_of("network.layers"),
                           "need at least input and output sizes");
    for (const auto& p : parts) {
      try {
        std::size_t pos = 0;
        const int v = std::stoi(p, &pos);
        if (pos != p.size()) throw std::invalid_argument("trailing");
        cfg.network.layer_sizes.push_back(v);
      } catch (const std::exception&) {
        detail::config_error(path, kv.line_of("network.layers"),
                             "bad layer size '" + p + "'");
      }
    }
    const int want = static_cast<int>(cfg.network.layer_sizes.size()) - 2;
    if (kv.has("network.activations") && !kv.raw("network.activations").empty()) {
      for (const auto& name : detail::split_list(kv.raw("network.activations")))
        cfg.network.activations.push_back(detail::parse_activation(
            name, path, kv.line_of("network.activations")));
    }
    if (static_cast<int>(cfg.network.activations.size()) != want)
      detail::config_error(path, kv.line_of("network.layers"),
                           "expected " + std::to_string(want) +
                               " activations for " +
                               std::to_string(cfg.network.layer_sizes.size()) +
                               " layer sizes, got " +
                               std::to_string(cfg.network.activations.size()));
    cfg.network.seed = kv.get_seed("network.seed");
    cfg.network.init_scale = kv.get_double("network.init_scale", 1.0);
    cfg.network.with_biases = kv.get_bool("network.biases", true);
    cfg.network.validate();
  }

  // Loss.
  {
    const std::string& v = kv.raw("loss");
    if (v == "squared") cfg.loss = LossFamily::SquaredLoss;
    else if (v == "cross_entropy") cfg.loss = LossFamily::CrossEntropy;
    else detail::config_error(path, kv.line_of("loss"), "unknown loss '" + v + "'");
  }

  // Training.
  {
    cfg.train.eps = kv.get_double("train.eps");
    cfg.train.beta = kv.get_double("train.beta");
    cfg.train.alpha = kv.get_double("train.alpha");
    cfg.train.D = kv.get_double("train.D", 1.0);
    const std::string& alg = kv.raw("train.algorithm");
    if (alg == "closed_form") cfg.train.algorithm = Algorithm::ClosedForm;
    else if (alg == "inner_gd") cfg.train.algorithm = Algorithm::InnerGD;
    else detail::config_error(path, kv.line_of("train.algorithm"),
                              "unknown algorithm '" + alg + "'");
    cfg.train.inner_tol = kv.get_double("train.inner_tol", 0.0);
    cfg.train.inner_max_iters =
        static_cast<int>(kv.get_int("train.inner_max_iters", 200000));
    cfg.train.seed = kv.has("train.seed") ? kv.get_seed("train.seed") : 0;
    cfg.train.validate();
  }

  // Dataset.
  {
    const std::string& src = kv.raw("dataset.source");
    if (src == "csv") {
      cfg.source = DatasetSource::CsvFile;
      cfg.csv_path = kv.raw("dataset.path");
    } else if (src == "two_point") {
      cfg.source = DatasetSource::TwoPointAppendix;
      if (kv.has("dataset.x1")) cfg.two_point_x1 = detail::parse_point2(kv, "dataset.x1");
      if (kv.has("dataset.x2")) cfg.two_point_x2 = detail::parse_point2(kv, "dataset.x2");
    } else if (src == "gaussian_blobs" || src == "random_regression") {
      cfg.source = src == "gaussian_blobs" ? DatasetSource::GaussianBlobs
                                           : DatasetSource::RandomRegression;
      cfg.data_n = static_cast<int>(kv.get_int("dataset.n"));
      cfg.data_m = static_cast<int>(kv.get_int("dataset.m"));
      cfg.data_c = static_cast<int>(kv.get_int("dataset.c"));
      cfg.data_seed = kv.get_seed("dataset.seed");
      if (cfg.data_n < 1 || cfg.data_m < 1 || cfg.data_c < 1)
        detail::config_error(path, kv.line_of("dataset.n"),
                             "dataset.n/m/c must be positive");
      if (cfg.source == DatasetSource::RandomRegression &&
          cfg.loss == LossFamily::CrossEntropy)
        detail::config_error(path, kv.line_of("dataset.source"),
                             "random_regression provides real-valued targets; "
                             "use loss = squared");
    } else {
      detail::config_error(path, kv.line_of("dataset.source"),
                           "unknown dataset source '" + src + "'");
    }
  }

  cfg.init_min_gap = kv.get_double("init.min_gap", 0.0);
  if (kv.has("output.dir")) cfg.output_dir = kv.raw("output.dir");

  // Baseline (optional).
  if (kv.has("baseline.kind")) {
    const std::string& kind = kv.raw("baseline.kind");
    if (kind == "full_gd") cfg.baseline = BaselineKind::FullGradientDescent;
    else if (kind == "sgd") cfg.baseline = BaselineKind::StochasticGD;
    else detail::config_error(path, kv.line_of("baseline.kind"),
                              "unknown baseline kind '" + kind + "'");
    cfg.baseline_step = kv.get_double("baseline.step");
    cfg.baseline_iters = static_cast<int>(kv.get_int("baseline.iters"));
    if (cfg.baseline_step <= 0.0 || cfg.baseline_iters < 0)
      detail::config_error(path, kv.line_of("baseline.step"),
                           "baseline.step must be > 0, baseline.iters >= 0");
    if (cfg.baseline == BaselineKind::StochasticGD) {
      cfg.baseline_batch = static_cast<int>(kv.get_int("baseline.batch"));
      if (cfg.baseline_batch < 1)
        detail::config_error(path, kv.line_of("baseline.batch"),
                             "baseline.batch must be >= 1");
      cfg.baseline_seed = kv.get_seed("baseline.seed");
    }
  }

  const auto leftovers = kv.unused_keys();
  if (!leftovers.empty()) {
    std::string msg = "unknown key(s):";
    for (const auto& k : leftovers) msg += " '" + k + "'";
    throw std::runtime_error(path + ": " + msg);
  }
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

// Inverse of parse_config for the keys that matter; parse(format(cfg))
// reproduces cfg. Used for config echoes and round-trip checks.
inline std::string format_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "network.layers = ";
  for (std::size_t i = 0; i < cfg.network.layer_sizes.size(); ++i)
    out << (i ? "," : "") << cfg.network.layer_sizes[i];
  out << "\n";
  if (!cfg.network.activations.empty()) {
    out << "network.activations = ";
    for (std::size_t i = 0; i < cfg.network.activations.size(); ++i)
      out << (i ? "," : "") << activation_name(cfg.network.activations[i]);
    out << "\n";
  }
  out << "network.seed = " << cfg.network.seed << "\n";
  out << "network.init_scale = " << cfg.network.init_scale << "\n";
  out << "network.biases = " << (cfg.network.with_biases ? "true" : "false") << "\n";
  out << "loss = "
      << (cfg.loss == LossFamily::SquaredLoss ? "squared" : "cross_entropy") << "\n";
  out << "train.eps = " << cfg.train.eps << "\n";
  out << "train.beta = " << cfg.train.beta << "\n";
  out << "train.alpha = " << cfg.train.alpha << "\n";
  out << "train.D = " << cfg.train.D << "\n";
  out << "train.algorithm = "
      << (cfg.train.algorithm == Algorithm::ClosedForm ? "closed_form" : "inner_gd")
      << "\n";
  if (cfg.train.inner_tol > 0.0) out << "train.inner_tol = " << cfg.train.inner_tol << "\n";
  out << "train.inner_max_iters = " << cfg.train.inner_max_iters << "\n";
  out << "train.seed = " << cfg.train.seed << "\n";
  switch (cfg.source) {
    case DatasetSource::CsvFile:
      out << "dataset.source = csv\n";
      out << "dataset.path = " << cfg.csv_path << "\n";
      break;
    case DatasetSource::TwoPointAppendix:
      out << "dataset.source = two_point\n";
      out << "dataset.x1 = " << cfg.two_point_x1[0] << "," << cfg.two_point_x1[1] << "\n";
      out << "dataset.x2 = " << cfg.two_point_x2[0] << "," << cfg.two_point_x2[1] << "\n";
      break;
    case DatasetSource::GaussianBlobs:
    case DatasetSource::RandomRegression:
      out << "dataset.source = "
          << (cfg.source == DatasetSource::GaussianBlobs ? "gaussian_blobs"
                                                         : "random_regression")
          << "\n";
      out << "dataset.n = " << cfg.data_n << "\n";
      out << "dataset.m = " << cfg.data_m << "\n";
      out << "dataset.c = " << cfg.data_c << "\n";
      out << "dataset.seed = " << cfg.data_seed << "\n";
      break;
  }
  if (cfg.init_min_gap > 0.0) out << "init.min_gap = " << cfg.init_min_gap << "\n";
  out << "output.dir = " << cfg.output_dir << "\n";
  if (cfg.baseline != BaselineKind::None) {
    out << "baseline.kind = "
        << (cfg.baseline == BaselineKind::FullGradientDescent ? "full_gd" : "sgd")
        << "\n";
    out << "baseline.step = " << cfg.baseline_step << "\n";
    out << "baseline.iters = " << cfg.baseline_iters << "\n";
    if (cfg.baseline == BaselineKind::StochasticGD) {
      out << "baseline.batch = " << cfg.baseline_batch << "\n";
      out << "baseline.seed = " << cfg.baseline_seed << "\n";
    }
  }
  return out.str();
}

}  // namespace copt
