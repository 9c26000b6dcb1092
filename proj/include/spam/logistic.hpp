#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "spam/backfit.hpp"
#include "spam/dataset.hpp"
#include "spam/errors.hpp"
#include "spam/smoothers.hpp"

namespace spam {

//! Working quantities of one Newton / local-scoring step: probabilities,
//! IRLS weights and the transformed response.
struct LogisticFitState {
  Eigen::VectorXd f;      // current additive fit incl. intercept
  Eigen::VectorXd p_hat;  // clamped probabilities
  Eigen::VectorXd w;      // p (1 - p)
  Eigen::VectorXd Z;      // working response
};

//! Probabilities are clamped away from {0,1} before weights and working
//! responses are formed; the working response divides by w.
inline constexpr double kProbClamp = 1e-5;

inline LogisticFitState make_scoring_state(const Eigen::VectorXd& f_total,
                                           const Eigen::VectorXd& y) {
  LogisticFitState st;
  st.f = f_total;
  st.p_hat = f_total.unaryExpr([](double v) {
    double p = 1.0 / (1.0 + std::exp(-v));
    return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  });
  st.w = st.p_hat.array() * (1.0 - st.p_hat.array());
  st.Z = st.f.array() + (y.array() - st.p_hat.array()) / st.w.array();
  if (!st.w.allFinite() || !st.Z.allFinite()) {
    throw numeric_error("local scoring: non-finite weights or working response");
  }
  return st;
}

//! Conditional-mean smooth for the scoring denominators, which estimate
//! E[w | X_j]. That target has a mean, while the centered series smoother
//! spans only mean-zero vectors, so the empirical mean is added back;
//! this matches what a kernel smoother returns for constant inputs.
//! Numerator smooths do NOT use this: components live in the mean-zero
//! space, and their smoothed residuals stay centered (any mean belongs to
//! the intercept, not to a component's threshold statistic).
inline Eigen::VectorXd smooth_conditional_mean(const FittedSmoother& s,
                                               const Eigen::VectorXd& v) {
  if (s.kind() == SmootherKind::OrthogonalSeries && s.centered_basis()) {
    return (s.apply(v).array() + v.mean()).matrix();
  }
  return s.apply(v);
}

//! Penalized component update for sparse logistic backfitting. Returns
//! zero when the smoothed weighted residual falls below the threshold
//! lambda sqrt(n); otherwise iterates
//!   f_j <- S_j(w R_j) / (S_j w + lambda sqrt(n) / ||f_j||)
//! to its fixed point (elementwise division). lambda = 0 reduces to the
//! plain weighted smooth S_j(w R_j) / S_j(w).
inline Eigen::VectorXd local_scoring_update(const LogisticFitState& state,
                                            const FittedSmoother& s,
                                            const Eigen::VectorXd& R_j, double lambda,
                                            const Eigen::VectorXd* f_prev = nullptr) {
  if (!state.w.allFinite()) {
    throw numeric_error("local_scoring_update: non-finite weights");
  }
  const auto n = static_cast<double>(R_j.size());
  const Eigen::VectorXd u = s.apply((state.w.array() * R_j.array()).matrix());
  const Eigen::VectorXd v = smooth_conditional_mean(s, state.w);
  const double sqrt_n = std::sqrt(n);

  if (lambda > 0 && u.norm() < lambda * sqrt_n) {
    return Eigen::VectorXd::Zero(R_j.size());
  }
  if (lambda == 0.0) {
    return (u.array() / v.array()).matrix();
  }

  Eigen::VectorXd f;
  if (f_prev && f_prev->size() == R_j.size() && f_prev->norm() > 0) {
    f = *f_prev;
  } else {
    f = (u.array() / v.array()).matrix();
  }
  constexpr int kMaxInner = 50;
  constexpr double kInnerTol = 1e-6;
  for (int it = 0; it < kMaxInner; ++it) {
    const double nf = f.norm();
    if (!(nf > 0)) return Eigen::VectorXd::Zero(R_j.size());
    const Eigen::VectorXd next =
        (u.array() / (v.array() + lambda * sqrt_n / nf)).matrix();
    const double change = (next - f).norm() / std::max(nf, 1e-12);
    f = next;
    if (change < kInnerTol) break;
  }
  if (!f.allFinite()) throw numeric_error("local_scoring_update: fixed point diverged");
  return f;
}

//! Sparse additive logistic regression: an outer local-scoring loop that
//! refreshes (p, w, Z) after every full sweep, with the penalized
//! component update inside. The returned model carries centered
//! components (means absorbed into the intercept) and predicts
//! probabilities through the logistic link.
inline SpamModel fit_logistic(
    const Dataset& data, const FitConfig& cfg,
    const std::function<void(int, const Eigen::VectorXd&)>& sweep_observer = nullptr) {
  detail::validate_fit_inputs(data, cfg);
  const Eigen::Index n = data.n(), p = data.p();
  Eigen::Index ones = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.Y(i) == 0.0) continue;
    if (data.Y(i) == 1.0) {
      ++ones;
      continue;
    }
    throw std::invalid_argument("fit_logistic: response must be 0/1, found " +
                                std::to_string(data.Y(i)));
  }
  if (ones == 0 || ones == n) {
    throw std::invalid_argument("fit_logistic: response has a single class");
  }

  ColumnSmoothers smoothers(data, cfg.smoother, /*center_basis=*/true);
  const bool local_linear = smoothers.spec().kind == SmootherKind::LocalLinear;

  const double ybar = static_cast<double>(ones) / static_cast<double>(n);
  double alpha = std::log(ybar / (1.0 - ybar));
  std::vector<Eigen::VectorXd> f(static_cast<std::size_t>(p), Eigen::VectorXd::Zero(n));
  Eigen::VectorXd comp_total = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd f_total = Eigen::VectorXd::Constant(n, alpha);
  std::vector<double> s_hat(static_cast<std::size_t>(p), 0.0);

  SpamModel model;
  model.lambda = cfg.lambda;
  model.link = LinkKind::Logistic;
  model.smoother = smoothers.spec();
  model.column_scales = data.column_scales;

  const double sqrt_n = std::sqrt(static_cast<double>(n));
  for (int sweep = 1; sweep <= cfg.max_outer_iters; ++sweep) {
    const LogisticFitState state = make_scoring_state(f_total, data.Y);
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto* s = smoothers.get(j);
      if (!s) continue;
      auto& fj = f[static_cast<std::size_t>(j)];
      const Eigen::VectorXd r_j = state.Z.array() - alpha - (comp_total - fj).array();
      const Eigen::VectorXd u = s->apply((state.w.array() * r_j.array()).matrix());
      s_hat[static_cast<std::size_t>(j)] = u.norm() / sqrt_n;
      Eigen::VectorXd fnew = local_scoring_update(state, *s, r_j, cfg.lambda, &fj);
      comp_total += fnew - fj;
      fj = std::move(fnew);
    }
    alpha = (state.w.array() * (state.Z - comp_total).array()).sum() / state.w.sum();

    const Eigen::VectorXd f_total_new = comp_total.array() + alpha;
    const double change = (f_total_new - f_total).cwiseAbs().maxCoeff() /
                          std::max(f_total.cwiseAbs().maxCoeff(), 1e-12);
    f_total = f_total_new;
    model.n_iters = sweep;
    if (sweep_observer) sweep_observer(sweep, f_total);
    if (change < cfg.tol) {
      model.converged = true;
      break;
    }
  }

  // Identifiability: per-component means move into the intercept.
  model.components.resize(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    auto& comp = model.components[static_cast<std::size_t>(j)];
    auto& fj = f[static_cast<std::size_t>(j)];
    const double m = fj.size() > 0 && fj.cwiseAbs().maxCoeff() > 0 ? fj.mean() : 0.0;
    if (m != 0.0) {
      fj.array() -= m;
      alpha += m;
    }
    comp.j = static_cast<int>(j);
    comp.fitted = std::move(fj);
    comp.s_hat = s_hat[static_cast<std::size_t>(j)];
    comp.active = comp.fitted.size() > 0 && comp.fitted.cwiseAbs().maxCoeff() > 0.0;
    const auto* s = smoothers.get(j);
    if (comp.active && s) {
      if (!local_linear) {
        // Least-squares series representation of the component for
        // out-of-sample evaluation.
        comp.coefficients = s->basis_coefficients(comp.fitted);
        comp.offset = -s->basis_column_means().dot(comp.coefficients);
      } else {
        comp.training_x = s->design_column();
        comp.training_targets = comp.fitted;
        comp.offset = 0.0;
      }
    }
  }
  model.intercept = alpha;

  // Penalized negative log-likelihood, recorded for diagnostics.
  const Eigen::VectorXd eta = f_total;
  double nll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
    nll += std::max(eta(i), 0.0) + std::log1p(std::exp(-std::abs(eta(i)))) -
           data.Y(i) * eta(i);
  }
  double pen = 0.0;
  for (const auto& c : model.components) {
    pen += std::sqrt(c.fitted.squaredNorm() / static_cast<double>(n));
  }
  model.objective = nll / static_cast<double>(n) + cfg.lambda * pen;
  return model;
}

}  // namespace spam
