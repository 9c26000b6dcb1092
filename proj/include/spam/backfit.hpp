#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spam/dataset.hpp"
#include "spam/errors.hpp"
#include "spam/smoothers.hpp"

namespace spam {

enum class LinkKind { Identity, Logistic };

struct FitConfig {
  double lambda = 0.0;
  SmootherSpec smoother{};
  int max_outer_iters = 100;
  double tol = 1e-4;  // max relative change of the stacked fit per sweep
};

//! One additive component f_j. `fitted` holds the mean-centered values at
//! the training points; the remaining fields are the representation used
//! to evaluate the component at new points (series coefficients plus a
//! centering offset, or kernel targets for the local-linear smoother).
struct ComponentFunction {
  int j = 0;  // 0-based column index
  Eigen::VectorXd fitted;
  double s_hat = 0.0;  // pre-threshold norm sqrt(mean(P_j^2))
  bool active = false;
  Eigen::VectorXd coefficients;      // series: coefficients on psi_k
  double offset = 0.0;               // constant completing the centered fit
  Eigen::VectorXd training_x;        // local-linear: design column
  Eigen::VectorXd training_targets;  // local-linear: thresholded targets
};

struct SpamModel {
  double intercept = 0.0;
  std::vector<ComponentFunction> components;
  double lambda = 0.0;
  bool converged = false;
  int n_iters = 0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> objective_history;  // value after each full sweep
  LinkKind link = LinkKind::Identity;
  SmootherSpec smoother{};
  std::vector<ColumnScale> column_scales;

  std::vector<int> active_set() const {  // 1-based, matching reports
    std::vector<int> s;
    for (const auto& c : components) {
      if (c.active) s.push_back(c.j + 1);
    }
    return s;
  }
};

//! Functional soft-threshold: shrink the whole smoothed component toward
//! zero. Returns the shrunk vector (not yet centered) and the
//! pre-threshold norm s_hat = sqrt(mean(P^2)).
inline std::pair<Eigen::VectorXd, double> soft_threshold_component(
    const Eigen::VectorXd& P_hat, double lambda) {
  const auto n = static_cast<double>(P_hat.size());
  const double s_hat = std::sqrt(P_hat.squaredNorm() / n);
  if (!(s_hat > lambda) || s_hat == 0.0) {
    return {Eigen::VectorXd::Zero(P_hat.size()), s_hat};
  }
  if (lambda == 0.0) return {P_hat, s_hat};
  return {(1.0 - lambda / s_hat) * P_hat, s_hat};
}

//! The per-column smoothers used by one fit, built once per dataset and
//! reusable across fits (warm-started paths refit many lambdas on the
//! same design). Constant columns get no smoother and stay inactive.
class ColumnSmoothers {
public:
  ColumnSmoothers(const Dataset& data, const SmootherSpec& spec, bool center_basis) {
    spec_ = spec;
    if (spec_.kind == SmootherKind::OrthogonalSeries && spec_.truncation == 0) {
      spec_.truncation = default_truncation(data.n());
    }
    smoothers_.resize(static_cast<std::size_t>(data.p()));
    for (Eigen::Index j = 0; j < data.p(); ++j) {
      if (data.constant_column[static_cast<std::size_t>(j)]) continue;
      smoothers_[static_cast<std::size_t>(j)] =
          FittedSmoother::fit(spec_, data.X.col(j), center_basis);
    }
  }

  const FittedSmoother* get(Eigen::Index j) const {
    const auto& s = smoothers_[static_cast<std::size_t>(j)];
    return s ? &*s : nullptr;
  }
  double trace(Eigen::Index j) const {
    const auto* s = get(j);
    return s ? s->trace() : 0.0;
  }
  const SmootherSpec& spec() const { return spec_; }
  std::size_t size() const { return smoothers_.size(); }

private:
  SmootherSpec spec_;
  std::vector<std::optional<FittedSmoother>> smoothers_;
};

//! Penalized objective on fitted component vectors:
//!   (1/2n)||Yc - sum_j f_j||^2 + lambda sum_j sqrt(mean(f_j^2)).
//! For series smoothing this is the exact sample objective the sweeps
//! descend; for local-linear smoothing it is the monitoring surrogate.
inline double spam_objective(const Eigen::VectorXd& y_centered,
                             const std::vector<Eigen::VectorXd>& f, double lambda) {
  const auto n = static_cast<double>(y_centered.size());
  Eigen::VectorXd total = Eigen::VectorXd::Zero(y_centered.size());
  double pen = 0.0;
  for (const auto& fj : f) {
    total += fj;
    pen += std::sqrt(fj.squaredNorm() / n);
  }
  return (y_centered - total).squaredNorm() / (2.0 * n) + lambda * pen;
}

//! Smallest penalty at which the first sweep from zero thresholds every
//! component away (and the all-zero fit is then stationary).
inline double lambda_max(const Dataset& data, const ColumnSmoothers& smoothers) {
  const Eigen::VectorXd yc = data.Y.array() - data.Y.mean();
  double lmax = 0.0;
  for (Eigen::Index j = 0; j < data.p(); ++j) {
    const auto* s = smoothers.get(j);
    if (!s) continue;
    const Eigen::VectorXd p = s->apply(yc);
    lmax = std::max(lmax, std::sqrt(p.squaredNorm() / static_cast<double>(data.n())));
  }
  return lmax;
}

namespace detail {

inline void validate_fit_inputs(const Dataset& data, const FitConfig& cfg) {
  if (data.n() == 0 || data.p() == 0) {
    throw std::invalid_argument("fit: dataset is empty (n = " + std::to_string(data.n()) +
                                ", p = " + std::to_string(data.p()) + ")");
  }
  if (!data.X.allFinite() || !data.Y.allFinite()) {
    throw std::invalid_argument("fit: non-finite values in X or Y");
  }
  if (cfg.lambda < 0) throw std::invalid_argument("fit: lambda must be >= 0");
  if (!(cfg.tol > 0)) throw std::invalid_argument("fit: tol must be > 0");
  if (cfg.max_outer_iters < 1) throw std::invalid_argument("fit: max_outer_iters must be >= 1");
}

//! Package the per-point component fit into its evaluation representation.
inline void finalize_component(ComponentFunction& comp, const FittedSmoother* s,
                               const Eigen::VectorXd& targets, double shrink_offset) {
  if (!s || !comp.active) {
    comp.coefficients = Eigen::VectorXd();
    comp.offset = 0.0;
    comp.training_targets = Eigen::VectorXd();
    comp.training_x = Eigen::VectorXd();
    return;
  }
  if (s->kind() == SmootherKind::OrthogonalSeries) {
    // fitted lies in the span of the centered basis columns; express it
    // as raw-basis coefficients plus the implied constant.
    comp.coefficients = s->basis_coefficients(comp.fitted);
    comp.offset = -s->basis_column_means().dot(comp.coefficients);
  } else {
    comp.training_x = s->design_column();
    comp.training_targets = targets;
    comp.offset = shrink_offset;
  }
}

}  // namespace detail

//! SpAM backfitting with a prebuilt smoother set: cycle over columns,
//! smooth the partial residual, soft-threshold the whole component,
//! center, until the stacked fit stops moving.
inline SpamModel fit_with_smoothers(const Dataset& data, const FitConfig& cfg,
                                    const ColumnSmoothers& smoothers,
                                    const SpamModel* warm_start = nullptr) {
  detail::validate_fit_inputs(data, cfg);
  const Eigen::Index n = data.n(), p = data.p();
  const Eigen::VectorXd yc = data.Y.array() - data.Y.mean();

  std::vector<Eigen::VectorXd> f(static_cast<std::size_t>(p),
                                 Eigen::VectorXd::Zero(n));
  if (warm_start) {
    if (static_cast<Eigen::Index>(warm_start->components.size()) != p ||
        (!warm_start->components.empty() &&
         warm_start->components.front().fitted.size() != n)) {
      throw std::invalid_argument("fit: warm start shape does not match dataset");
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      f[static_cast<std::size_t>(j)] = warm_start->components[static_cast<std::size_t>(j)].fitted;
    }
  }
  Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
  for (const auto& fj : f) total += fj;

  std::vector<double> s_hat(static_cast<std::size_t>(p), 0.0);
  std::vector<Eigen::VectorXd> ll_targets;  // local-linear eval targets
  std::vector<double> ll_offsets;
  const bool local_linear = smoothers.spec().kind == SmootherKind::LocalLinear;
  if (local_linear) {
    ll_targets.assign(static_cast<std::size_t>(p), Eigen::VectorXd::Zero(n));
    ll_offsets.assign(static_cast<std::size_t>(p), 0.0);
  }

  SpamModel model;
  model.lambda = cfg.lambda;
  model.link = LinkKind::Identity;
  model.smoother = smoothers.spec();
  model.column_scales = data.column_scales;
  model.intercept = data.Y.mean();

  Eigen::VectorXd residual(n), p_hat(n);
  for (int sweep = 1; sweep <= cfg.max_outer_iters; ++sweep) {
    double max_change = 0.0, max_old = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto* s = smoothers.get(j);
      auto& fj = f[static_cast<std::size_t>(j)];
      max_old = std::max(max_old, fj.cwiseAbs().maxCoeff());
      if (!s) continue;
      residual = yc - total + fj;
      p_hat = s->apply(residual);
      auto [fnew, sj] = soft_threshold_component(p_hat, cfg.lambda);
      s_hat[static_cast<std::size_t>(j)] = sj;
      const double shrink = sj > cfg.lambda && sj > 0 ? 1.0 - cfg.lambda / sj : 0.0;
      const double m = fnew.mean();
      if (m != 0.0) fnew.array() -= m;
      if (local_linear) {
        ll_targets[static_cast<std::size_t>(j)] = shrink * residual;
        ll_offsets[static_cast<std::size_t>(j)] = m;
      }
      max_change = std::max(max_change, (fnew - fj).cwiseAbs().maxCoeff());
      total += fnew - fj;
      fj = std::move(fnew);
    }
    model.n_iters = sweep;
    model.objective_history.push_back(spam_objective(yc, f, cfg.lambda));
    if (max_change / std::max(max_old, 1e-12) < cfg.tol) {
      model.converged = true;
      break;
    }
  }
  model.objective = model.objective_history.back();

  model.components.resize(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    auto& comp = model.components[static_cast<std::size_t>(j)];
    comp.j = static_cast<int>(j);
    comp.fitted = std::move(f[static_cast<std::size_t>(j)]);
    comp.s_hat = s_hat[static_cast<std::size_t>(j)];
    comp.active = comp.fitted.cwiseAbs().maxCoeff() > 0.0;
    detail::finalize_component(comp, smoothers.get(j),
                               local_linear ? ll_targets[static_cast<std::size_t>(j)]
                                            : Eigen::VectorXd(),
                               local_linear ? ll_offsets[static_cast<std::size_t>(j)] : 0.0);
  }
  return model;
}

inline SpamModel fit(const Dataset& data, const FitConfig& cfg,
                     const SpamModel* warm_start = nullptr) {
  detail::validate_fit_inputs(data, cfg);
  ColumnSmoothers smoothers(data, cfg.smoother, /*center_basis=*/true);
  return fit_with_smoothers(data, cfg, smoothers, warm_start);
}

//! Evaluate one component at already-scaled points in [0,1].
inline Eigen::VectorXd evaluate_component_scaled(const SpamModel& model,
                                                 const ComponentFunction& comp,
                                                 const Eigen::VectorXd& x_scaled) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x_scaled.size());
  if (!comp.active) return out;
  if (model.smoother.kind == SmootherKind::OrthogonalSeries) {
    for (Eigen::Index i = 0; i < x_scaled.size(); ++i) {
      double v = comp.offset;
      for (Eigen::Index k = 0; k < comp.coefficients.size(); ++k) {
        v += comp.coefficients(k) *
             basis_function(model.smoother.basis, static_cast<int>(k), x_scaled(i));
      }
      out(i) = v;
    }
  } else {
    const double h = model.smoother.bandwidth > 0 ? model.smoother.bandwidth
                                                  : default_bandwidth(comp.training_x);
    for (Eigen::Index i = 0; i < x_scaled.size(); ++i) {
      out(i) = local_linear_at(x_scaled(i), comp.training_x, comp.training_targets, h) -
               comp.offset;
    }
  }
  return out;
}

//! Evaluate one component on raw (unscaled) inputs.
inline Eigen::VectorXd evaluate_component(const SpamModel& model, int j,
                                          const Eigen::VectorXd& x_raw) {
  const auto& comp = model.components.at(static_cast<std::size_t>(j));
  const auto& sc = model.column_scales.at(static_cast<std::size_t>(j));
  Eigen::VectorXd xs(x_raw.size());
  for (Eigen::Index i = 0; i < x_raw.size(); ++i) {
    xs(i) = std::clamp(scale_into_unit(x_raw(i), sc), 0.0, 1.0);
  }
  return evaluate_component_scaled(model, comp, xs);
}

//! Out-of-sample prediction: intercept + sum of component evaluations,
//! pushed through the logistic link when the model is a classifier.
inline Eigen::VectorXd predict(const SpamModel& model, const Eigen::MatrixXd& X_new) {
  if (X_new.cols() != static_cast<Eigen::Index>(model.components.size())) {
    throw std::invalid_argument("predict: X has " + std::to_string(X_new.cols()) +
                                " columns, model expects " +
                                std::to_string(model.components.size()));
  }
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(X_new.rows(), model.intercept);
  for (const auto& comp : model.components) {
    if (!comp.active) continue;
    eta += evaluate_component(model, comp.j, X_new.col(comp.j));
  }
  if (model.link == LinkKind::Logistic) {
    return eta.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  }
  return eta;
}

}  // namespace spam
