#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spam/backfit.hpp"
#include "spam/dataset.hpp"

namespace spam {

//! Risk estimates attached to one model on the path. gcv_valid is false
//! when df >= n, where the GCV denominator vanishes.
struct RiskEstimates {
  double df = 0.0;
  double cp = 0.0;
  double gcv = 0.0;
  double sigma2_hat = 0.0;
  bool gcv_valid = true;
};

//! Total effective degrees of freedom: sum of smoother traces over the
//! active components.
inline double effective_df(const SpamModel& model, const ColumnSmoothers& smoothers) {
  double df = 0.0;
  for (const auto& comp : model.components) {
    if (comp.active) df += smoothers.trace(comp.j);
  }
  return df;
}

inline double training_rss(const Dataset& data, const SpamModel& model) {
  Eigen::VectorXd fit = Eigen::VectorXd::Constant(data.n(), model.intercept);
  for (const auto& comp : model.components) {
    if (comp.active) fit += comp.fitted;
  }
  return (data.Y - fit).squaredNorm();
}

//! Cp risk estimate: mean squared residual plus 2 sigma^2 df / n.
inline double cp_score(const Dataset& data, const SpamModel& model, double df,
                       double sigma2) {
  if (!(sigma2 > 0)) throw std::invalid_argument("cp_score: sigma2 must be > 0");
  const auto n = static_cast<double>(data.n());
  return training_rss(data, model) / n + 2.0 * sigma2 * df / n;
}

//! Generalized cross-validation with the sparse degrees of freedom.
//! Returns +inf when df >= n.
inline double gcv_score(const Dataset& data, const SpamModel& model, double df) {
  const auto n = static_cast<double>(data.n());
  if (df >= n) return std::numeric_limits<double>::infinity();
  const double denom = 1.0 - df / n;
  return training_rss(data, model) / n / (denom * denom);
}

//! A descending lambda grid of fits, each warm-started from the previous,
//! with risk estimates and the normalized path coordinate
//! sum_k ||f_k(lambda)|| / max_lambda sum_k ||f_k(lambda)||.
struct LambdaPath {
  std::vector<double> lambdas;
  std::vector<SpamModel> models;
  std::vector<RiskEstimates> risk;
  std::vector<double> normalized_coordinate;
  double lambda_max = 0.0;
  double sigma2_hat = 0.0;

  std::size_t selected_by_cp() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < risk.size(); ++k) {
      if (risk[k].cp < risk[best].cp) best = k;
    }
    return best;
  }
  std::size_t selected_by_gcv() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < risk.size(); ++k) {
      const bool better = risk[k].gcv_valid &&
                          (!risk[best].gcv_valid || risk[k].gcv < risk[best].gcv);
      if (better) best = k;
    }
    return best;
  }
};

struct PathOptions {
  int grid_size = 50;
  double lambda_min_ratio = 1e-3;
  std::optional<std::vector<double>> grid;      // descending, overrides the default
  std::optional<double> sigma2_override;
};

inline std::vector<double> default_lambda_grid(double lmax, int grid_size,
                                               double min_ratio) {
  std::vector<double> grid(static_cast<std::size_t>(grid_size));
  if (grid_size == 1) {
    grid[0] = lmax;
    return grid;
  }
  const double lmin = lmax * min_ratio;
  const double step = (std::log(lmax) - std::log(lmin)) / (grid_size - 1);
  for (int k = 0; k < grid_size; ++k) {
    grid[static_cast<std::size_t>(k)] = std::exp(std::log(lmax) - step * k);
  }
  return grid;
}

inline double total_component_norm(const SpamModel& model) {
  double t = 0.0;
  const auto n = static_cast<double>(model.components.empty()
                                         ? 1
                                         : model.components.front().fitted.size());
  for (const auto& comp : model.components) {
    t += std::sqrt(comp.fitted.squaredNorm() / n);
  }
  return t;
}

//! Fit the whole regularization path. The error variance for Cp defaults
//! to RSS/(n - df) taken from the least-regularized model whose df stays
//! below n/2, unless overridden.
inline LambdaPath compute_path(const Dataset& data, const FitConfig& cfg_base,
                               const PathOptions& opts = {}) {
  detail::validate_fit_inputs(data, cfg_base);
  ColumnSmoothers smoothers(data, cfg_base.smoother, /*center_basis=*/true);

  LambdaPath path;
  path.lambda_max = lambda_max(data, smoothers);
  if (opts.grid) {
    for (std::size_t k = 1; k < opts.grid->size(); ++k) {
      if (!((*opts.grid)[k] < (*opts.grid)[k - 1])) {
        throw std::invalid_argument("compute_path: lambda grid must be strictly decreasing");
      }
    }
    path.lambdas = *opts.grid;
  } else {
    if (opts.grid_size < 1) throw std::invalid_argument("compute_path: grid_size must be >= 1");
    // A zero lambda_max means the response is already flat; keep a
    // degenerate one-point grid rather than taking log(0).
    if (path.lambda_max > 0) {
      path.lambdas = default_lambda_grid(path.lambda_max, opts.grid_size,
                                         opts.lambda_min_ratio);
    } else {
      path.lambdas.assign(1, 0.0);
    }
  }

  const SpamModel* warm = nullptr;
  for (double lambda : path.lambdas) {
    FitConfig cfg = cfg_base;
    cfg.lambda = lambda;
    try {
      path.models.push_back(fit_with_smoothers(data, cfg, smoothers, warm));
    } catch (const std::exception& e) {
      throw numeric_error("compute_path: fit failed at lambda = " +
                          std::to_string(lambda) + ": " + e.what());
    }
    warm = &path.models.back();
  }

  // Error variance from the least-regularized model with df < n/2.
  const auto n = static_cast<double>(data.n());
  std::vector<double> dfs(path.models.size());
  for (std::size_t k = 0; k < path.models.size(); ++k) {
    dfs[k] = effective_df(path.models[k], smoothers);
  }
  double sigma2 = 0.0;
  if (opts.sigma2_override) {
    sigma2 = *opts.sigma2_override;
    if (!(sigma2 > 0)) throw std::invalid_argument("compute_path: sigma2 override must be > 0");
  } else {
    std::ptrdiff_t pick = -1;
    for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(path.models.size()) - 1; k >= 0; --k) {
      if (dfs[static_cast<std::size_t>(k)] < n / 2.0) {
        pick = k;
        break;
      }
    }
    if (pick < 0) pick = 0;  // every model is saturated; fall back to the largest lambda
    const double df_pick = dfs[static_cast<std::size_t>(pick)];
    const double rss = training_rss(data, path.models[static_cast<std::size_t>(pick)]);
    const double denom = std::max(n - df_pick, 1.0);
    sigma2 = std::max(rss / denom, 1e-12);
  }
  path.sigma2_hat = sigma2;

  path.risk.resize(path.models.size());
  for (std::size_t k = 0; k < path.models.size(); ++k) {
    auto& r = path.risk[k];
    r.df = dfs[k];
    r.sigma2_hat = sigma2;
    r.cp = cp_score(data, path.models[k], r.df, sigma2);
    r.gcv = gcv_score(data, path.models[k], r.df);
    r.gcv_valid = r.df < n;
  }

  path.normalized_coordinate.resize(path.models.size());
  double max_norm = 0.0;
  for (const auto& m : path.models) max_norm = std::max(max_norm, total_component_norm(m));
  for (std::size_t k = 0; k < path.models.size(); ++k) {
    path.normalized_coordinate[k] =
        max_norm > 0 ? total_component_norm(path.models[k]) / max_norm : 0.0;
  }
  return path;
}

//! Path export: one row per (lambda, component), 1-based component index.
inline void write_path_csv(std::ostream& out, const LambdaPath& path) {
  out << "lambda,normalized_coordinate,j,component_norm,active,df,cp,gcv\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (std::size_t k = 0; k < path.models.size(); ++k) {
    const auto& model = path.models[k];
    const auto n = static_cast<double>(
        model.components.empty() ? 1 : model.components.front().fitted.size());
    for (const auto& comp : model.components) {
      put(path.lambdas[k]);
      out << ',';
      put(path.normalized_coordinate[k]);
      out << ',' << (comp.j + 1) << ',';
      put(std::sqrt(comp.fitted.squaredNorm() / n));
      out << ',' << (comp.active ? 1 : 0) << ',';
      put(path.risk[k].df);
      out << ',';
      put(path.risk[k].cp);
      out << ',';
      put(path.risk[k].gcv);
      out << '\n';
    }
  }
}

}  // namespace spam
