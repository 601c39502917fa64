#pragma once

#include <Eigen/Core>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "copt/losses.hpp"
#include "copt/rng.hpp"

namespace copt {

// n samples: input x^(i) in R^m plus the per-sample loss attachment
// (target vector or label) already bound into a LossKind.
struct Dataset {
  std::vector<Eigen::VectorXd> inputs;
  std::vector<LossKind> losses;
  int input_dim = 0;   // m
  int output_dim = 0;  // c

  int size() const { return static_cast<int>(inputs.size()); }
};

// Two orthonormal points in R^2 with one-hot-style class labels {0, 1}.
// The coordinates are configurable; the defaults keep the stacked-Jacobian
// rank argument transparent.
inline Dataset make_two_point(const Eigen::Vector2d& x1 = {1.0, 0.0},
                              const Eigen::Vector2d& x2 = {0.0, 1.0},
                              bool cross_entropy = false) {
  Dataset ds;
  ds.input_dim = 2;
  ds.output_dim = 2;
  ds.inputs = {x1, x2};
  if (cross_entropy) {
    ds.losses = {LossKind::cross_entropy(0, 2), LossKind::cross_entropy(1, 2)};
  } else {
    ds.losses = {LossKind::squared(Eigen::Vector2d(1.0, 0.0)),
                 LossKind::squared(Eigen::Vector2d(0.0, 1.0))};
  }
  return ds;
}

// Gaussian inputs around seeded class centers, labels assigned round-robin
// over the c classes. With squared loss the target is the one-hot vector of
// the label, so the same generator serves both loss families.
inline Dataset make_gaussian_blobs(int n, int m, int c, std::uint64_t seed,
                                   LossFamily family) {
  if (n < 1 || m < 1 || c < 1)
    throw std::invalid_argument("make_gaussian_blobs: n, m, c must be >= 1");
  Rng rng(seed);
  std::vector<Eigen::VectorXd> centers(c);
  for (int k = 0; k < c; ++k) {
    centers[k] = Eigen::VectorXd(m);
    for (int j = 0; j < m; ++j) centers[k][j] = 2.0 * rng.normal();
  }
  Dataset ds;
  ds.input_dim = m;
  ds.output_dim = c;
  ds.inputs.reserve(n);
  ds.losses.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int label = i % c;
    Eigen::VectorXd x(m);
    for (int j = 0; j < m; ++j) x[j] = centers[label][j] + rng.normal();
    ds.inputs.push_back(std::move(x));
    if (family == LossFamily::CrossEntropy) {
      ds.losses.push_back(LossKind::cross_entropy(label, c));
    } else {
      Eigen::VectorXd y = Eigen::VectorXd::Zero(c);
      y[label] = 1.0;
      ds.losses.push_back(LossKind::squared(std::move(y)));
    }
  }
  return ds;
}

// Gaussian inputs, Gaussian targets. Regression only.
inline Dataset make_random_regression(int n, int m, int c,
                                      std::uint64_t seed) {
  if (n < 1 || m < 1 || c < 1)
    throw std::invalid_argument(
        "make_random_regression: n, m, c must be >= 1");
  Rng rng(seed);
  Dataset ds;
  ds.input_dim = m;
  ds.output_dim = c;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(m);
    for (int j = 0; j < m; ++j) x[j] = rng.normal();
    Eigen::VectorXd y(c);
    for (int j = 0; j < c; ++j) y[j] = rng.normal();
    ds.inputs.push_back(std::move(x));
    ds.losses.push_back(LossKind::squared(std::move(y)));
  }
  return ds;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // Trim surrounding whitespace.
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos
                        ? std::string()
                        : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_cell(const std::string& cell, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("csv line " + std::to_string(line_no) +
                             ": non-numeric cell '" + cell + "'");
  }
}

}  // namespace detail

// CSV dataset. Header decides the mode:
//   x1,...,xm,y1,...,yc  -> regression rows (squared loss)
//   x1,...,xm,label      -> classification rows (cross-entropy)
// Comma separated, '.' decimal, UTF-8. Ragged rows, non-numeric cells and
// out-of-range labels are reported with their line number.
inline Dataset load_csv(const std::string& path, int num_classes = 0) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("csv file is empty: " + path);
  auto header = detail::split_csv_line(line);
  if (header.size() < 2)
    throw std::runtime_error("csv header needs at least two columns: " + path);

  const bool classification = header.back() == "label";
  int m = 0;
  int c = 0;
  if (classification) {
    m = static_cast<int>(header.size()) - 1;
    c = num_classes;
    if (c < 1)
      throw std::runtime_error(
          "classification csv requires the class count to be configured");
  } else {
    // Count leading x-columns, the rest are targets.
    for (const auto& name : header) {
      if (name.size() >= 1 && name[0] == 'x')
        ++m;
      else
        break;
    }
    c = static_cast<int>(header.size()) - m;
    if (m < 1 || c < 1)
      throw std::runtime_error("csv header must be x1..xm,y1..yc or "
                               "x1..xm,label: " + path);
  }

  Dataset ds;
  ds.input_dim = m;
  ds.output_dim = c;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    auto cells = detail::split_csv_line(line);
    if (static_cast<int>(cells.size()) != static_cast<int>(header.size()))
      throw std::runtime_error(
          "csv line " + std::to_string(line_no) + ": expected " +
          std::to_string(header.size()) + " cells, got " +
          std::to_string(cells.size()));
    Eigen::VectorXd x(m);
    for (int j = 0; j < m; ++j) x[j] = detail::parse_cell(cells[j], line_no);
    if (classification) {
      const double raw = detail::parse_cell(cells[m], line_no);
      const int label = static_cast<int>(raw);
      if (static_cast<double>(label) != raw || label < 0 || label >= c)
        throw std::runtime_error("csv line " + std::to_string(line_no) +
                                 ": label " + cells[m] +
                                 " outside [0, " + std::to_string(c) + ")");
      ds.losses.push_back(LossKind::cross_entropy(label, c));
    } else {
      Eigen::VectorXd y(c);
      for (int j = 0; j < c; ++j)
        y[j] = detail::parse_cell(cells[m + j], line_no);
      ds.losses.push_back(LossKind::squared(std::move(y)));
    }
    ds.inputs.push_back(std::move(x));
  }
  if (ds.inputs.empty())
    throw std::runtime_error("csv has a header but no data rows: " + path);
  return ds;
}

}  // namespace copt
