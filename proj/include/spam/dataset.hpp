#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spam/errors.hpp"

namespace spam {

//! Per-column min/max recorded when a design column is mapped into [0,1].
struct ColumnScale {
  double min = 0.0;
  double max = 1.0;
};

//! Design matrix plus response. X is stored column-scaled into [0,1];
//! the scaling metadata is kept so fitted models can map new points the
//! same way. Columns that were constant in the raw data cannot be scaled
//! and are flagged instead; solvers leave them permanently inactive.
struct Dataset {
  Eigen::MatrixXd X;  // n x p, entries in [0,1] when scaled
  Eigen::VectorXd Y;
  std::vector<ColumnScale> column_scales;
  std::vector<bool> constant_column;
  std::vector<std::string> feature_names;
  std::string response_name = "y";
  double y_mean = 0.0;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

inline double scale_into_unit(double v, const ColumnScale& s) {
  if (s.max > s.min) return (v - s.min) / (s.max - s.min);
  return 0.5;  // constant column, position is arbitrary
}

inline double unscale_from_unit(double u, const ColumnScale& s) {
  return s.min + u * (s.max - s.min);
}

//! Assemble a Dataset from raw columns. With scale = true each column is
//! min-max mapped into [0,1]; with scale = false values are stored as-is
//! and the identity scale (0,1) is recorded.
inline Dataset make_dataset(Eigen::MatrixXd X, Eigen::VectorXd Y, bool scale,
                            std::vector<std::string> names = {},
                            std::string response_name = "y") {
  if (X.rows() != Y.size()) {
    throw std::invalid_argument("make_dataset: X has " +
                                std::to_string(X.rows()) + " rows but Y has " +
                                std::to_string(Y.size()) + " entries");
  }
  Dataset d;
  const Eigen::Index n = X.rows(), p = X.cols();
  d.column_scales.resize(static_cast<std::size_t>(p));
  d.constant_column.resize(static_cast<std::size_t>(p), false);
  if (names.empty()) {
    names.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  }
  d.feature_names = std::move(names);
  d.response_name = std::move(response_name);
  for (Eigen::Index j = 0; j < p; ++j) {
    auto& sc = d.column_scales[static_cast<std::size_t>(j)];
    if (n > 0) {
      sc.min = X.col(j).minCoeff();
      sc.max = X.col(j).maxCoeff();
    }
    if (!(sc.max > sc.min)) {
      d.constant_column[static_cast<std::size_t>(j)] = true;
      sc.min = 0.0;
      sc.max = 1.0;  // identity scale; column is excluded from fitting anyway
      if (scale) X.col(j).setConstant(0.5);
      continue;
    }
    if (scale) {
      X.col(j) = (X.col(j).array() - sc.min) / (sc.max - sc.min);
    } else {
      sc = ColumnScale{0.0, 1.0};
    }
  }
  d.X = std::move(X);
  d.Y = std::move(Y);
  d.y_mean = n > 0 ? d.Y.mean() : 0.0;
  return d;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || end != begin + cell.size()) {
    throw std::invalid_argument("csv parse error: non-numeric cell '" + cell +
                                "' at data row " + std::to_string(row + 1) +
                                ", column " + std::to_string(col + 1));
  }
  return v;
}

inline void format_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace detail

//! Load a rectangular numeric CSV with a header row. The named response
//! column becomes Y; every other column becomes a design column.
inline Dataset load_csv(const std::string& path, const std::string& response_column,
                        bool scale = true) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open csv file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty csv file: " + path);
  std::vector<std::string> header = detail::split_csv_line(line);
  std::ptrdiff_t resp_idx = -1;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == response_column) {
      resp_idx = static_cast<std::ptrdiff_t>(k);
      break;
    }
  }
  if (resp_idx < 0) {
    throw std::invalid_argument("response column '" + response_column +
                                "' not found in " + path);
  }

  std::vector<std::vector<double>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::invalid_argument("csv row " + std::to_string(row + 1) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(header.size()));
    }
    std::vector<double> vals(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k) vals[k] = detail::parse_cell(cells[k], row, k);
    rows.push_back(std::move(vals));
    ++row;
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(header.size()) - 1;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd Y(n);
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (static_cast<std::ptrdiff_t>(k) != resp_idx) names.push_back(header[k]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index jx = 0;
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (static_cast<std::ptrdiff_t>(k) == resp_idx) {
        Y(i) = rows[static_cast<std::size_t>(i)][k];
      } else {
        X(i, jx++) = rows[static_cast<std::size_t>(i)][k];
      }
    }
  }
  return make_dataset(std::move(X), std::move(Y), scale, std::move(names), response_column);
}

//! Write the stored matrix and response as CSV (17 significant digits, so
//! reloading with scale = false reproduces the doubles bit-for-bit).
inline void save_csv(const Dataset& d, std::ostream& out) {
  std::string buf = d.response_name;
  for (const auto& name : d.feature_names) {
    buf += ',';
    buf += name;
  }
  buf += '\n';
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    detail::format_double(buf, d.Y(i));
    for (Eigen::Index j = 0; j < d.p(); ++j) {
      buf += ',';
      detail::format_double(buf, d.X(i, j));
    }
    buf += '\n';
    out << buf;
    buf.clear();
  }
}

inline void save_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open for writing: " + path);
  save_csv(d, out);
}

}  // namespace spam
