#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>

#include "spam/errors.hpp"

namespace spam {

enum class SmootherKind { OrthogonalSeries, LocalLinear };

//! Basis for the orthogonal-series smoother. Cosine is the working basis
//! (orthonormal for Lebesgue measure on [0,1], uniformly bounded);
//! Identity is the single function psi(x) = x, which turns the additive
//! solver into a plain linear one and is kept for cross-checks against
//! the parametric solvers.
enum class BasisKind { Cosine, Identity };

struct SmootherSpec {
  SmootherKind kind = SmootherKind::OrthogonalSeries;
  int truncation = 0;     // series size d; 0 = default_truncation(n)
  double bandwidth = 0.0; // kernel bandwidth h; 0 = default_bandwidth(x)
  BasisKind basis = BasisKind::Cosine;
};

//! Series truncation d ~ n^{1/5}, clamped to [3, n/4] so very small
//! samples still smooth and d stays well below n.
inline int default_truncation(Eigen::Index n) {
  int d = static_cast<int>(std::lround(std::pow(static_cast<double>(n), 0.2)));
  int hi = std::max(1, static_cast<int>(n / 4));
  d = std::max(d, 3);
  d = std::min(d, hi);
  return std::max(d, 1);
}

//! Normal-reference plug-in bandwidth 1.06 sd(x) n^{-1/5}.
inline double default_bandwidth(const Eigen::VectorXd& x) {
  const auto n = static_cast<double>(x.size());
  double sd = std::sqrt((x.array() - x.mean()).square().sum() / std::max(1.0, n - 1.0));
  double h = 1.06 * sd * std::pow(n, -0.2);
  return h > 0 ? h : 0.1;  // degenerate column; any positive value works
}

//! Evaluate the series basis at one point: column k is psi_k(x).
inline double basis_function(BasisKind basis, int k, double x) {
  if (basis == BasisKind::Identity) return x;
  return std::numbers::sqrt2 * std::cos(static_cast<double>(k + 1) * std::numbers::pi * x);
}

//! Basis matrix: row i, column k holds psi_{k+1}(x_i). The constant
//! function is not part of the basis; component means are handled by
//! centering elsewhere.
inline Eigen::MatrixXd build_basis(const Eigen::VectorXd& x, int d,
                                   BasisKind basis = BasisKind::Cosine) {
  if (d < 1) throw std::invalid_argument("build_basis: d must be >= 1");
  if (basis == BasisKind::Identity && d != 1) {
    throw std::invalid_argument("build_basis: identity basis requires d = 1");
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x(i) >= 0.0 && x(i) <= 1.0)) {
      throw std::domain_error("build_basis: x(" + std::to_string(i) + ") = " +
                              std::to_string(x(i)) + " outside [0,1]");
    }
  }
  Eigen::MatrixXd psi(x.size(), d);
  for (int k = 0; k < d; ++k) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      psi(i, k) = basis_function(basis, k, x(i));
    }
  }
  return psi;
}

//! Local-linear fitted value at x0 from (x, targets) with a Gaussian
//! kernel. Falls back to the kernel-weighted mean when the local design
//! is degenerate (all mass at one abscissa).
inline double local_linear_at(double x0, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& targets, double h) {
  double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
  for (Eigen::Index l = 0; l < x.size(); ++l) {
    const double u = (x(l) - x0) / h;
    const double k = std::exp(-0.5 * u * u);
    const double dx = x(l) - x0;
    s0 += k;
    s1 += k * dx;
    s2 += k * dx * dx;
    t0 += k * targets(l);
    t1 += k * dx * targets(l);
  }
  const double det = s0 * s2 - s1 * s1;
  if (det > 1e-12 * s0 * s2 && s2 > 0) {
    return (s2 * t0 - s1 * t1) / det;
  }
  return t0 / s0;
}

//! A fitted univariate linear smoother: either least-squares projection
//! onto a truncated series basis or a Gaussian local-linear smoother.
//! Immutable once constructed; apply() is safe to call concurrently.
class FittedSmoother {
public:
  //! Fit on a design column. For the series smoother, center_basis
  //! replaces each basis column by its empirically centered version, so
  //! the smoother's range consists of mean-zero vectors.
  static FittedSmoother fit(const SmootherSpec& spec, const Eigen::VectorXd& x,
                            bool center_basis = false) {
    const Eigen::Index n = x.size();
    if (n < 3) throw std::invalid_argument("fit_smoother: need n >= 3 samples");
    FittedSmoother s;
    s.kind_ = spec.kind;
    s.basis_kind_ = spec.basis;
    s.centered_ = center_basis && spec.kind == SmootherKind::OrthogonalSeries;
    s.x_ = x;
    if (spec.kind == SmootherKind::OrthogonalSeries) {
      int d = spec.truncation > 0 ? spec.truncation : default_truncation(n);
      if (d >= n) {
        throw std::invalid_argument("fit_smoother: truncation d = " + std::to_string(d) +
                                    " must be < n = " + std::to_string(n));
      }
      s.d_ = d;
      s.psi_ = build_basis(x, d, spec.basis);
      s.col_means_ = s.psi_.colwise().mean();
      if (s.centered_) s.psi_.rowwise() -= s.col_means_;
      s.factor_gram();
    } else {
      s.h_ = spec.bandwidth > 0 ? spec.bandwidth : default_bandwidth(x);
      s.assemble_hat();
    }
    return s;
  }

  //! Apply the linear smoothing operator to a residual vector.
  Eigen::VectorXd apply(const Eigen::VectorXd& r) const {
    if (r.size() != x_.size()) {
      throw std::invalid_argument("smoother apply: residual length " +
                                  std::to_string(r.size()) + " != fitted length " +
                                  std::to_string(x_.size()));
    }
    if (kind_ == SmootherKind::OrthogonalSeries) {
      return psi_ * llt_.solve(psi_.transpose() * r);
    }
    return hat_ * r;
  }

  //! Series coefficients of the projection of r (series smoother only).
  Eigen::VectorXd basis_coefficients(const Eigen::VectorXd& r) const {
    return llt_.solve(psi_.transpose() * r);
  }

  double trace() const { return trace_; }
  SmootherKind kind() const { return kind_; }
  BasisKind basis() const { return basis_kind_; }
  int truncation() const { return d_; }
  double bandwidth() const { return h_; }
  bool centered_basis() const { return centered_; }
  const Eigen::MatrixXd& basis_matrix() const { return psi_; }
  //! Column means of the raw basis (before centering); needed to turn
  //! coefficients on the centered columns into (coefficients, offset)
  //! on the plain basis functions.
  const Eigen::RowVectorXd& basis_column_means() const { return col_means_; }
  const Eigen::VectorXd& design_column() const { return x_; }

private:
  FittedSmoother() = default;

  void factor_gram() {
    Eigen::MatrixXd gram = psi_.transpose() * psi_;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const double max_ev = eig.eigenvalues().maxCoeff();
    const double rank_tol = max_ev * static_cast<double>(d_) * 1e-14;
    int rank = 0;
    for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) {
      if (eig.eigenvalues()(k) > rank_tol) ++rank;
    }
    trace_ = static_cast<double>(rank);
    // Ridge jitter keeps the solve defined when ties in x make the basis
    // rank-deficient; the added mass is far below the rank tolerance.
    double jitter = 0.0;
    const double min_ev = eig.eigenvalues().minCoeff();
    if (!(min_ev > max_ev * 1e-12)) {
      jitter = 1e-10 * gram.trace() / static_cast<double>(d_);
      if (!(jitter > 0)) jitter = 1e-12;
    }
    while (true) {
      Eigen::MatrixXd g = gram;
      if (jitter > 0) g.diagonal().array() += jitter;
      llt_.compute(g);
      if (llt_.info() == Eigen::Success) break;
      jitter = jitter > 0 ? jitter * 10 : 1e-12;
    }
  }

  void assemble_hat() {
    const Eigen::Index n = x_.size();
    hat_.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double s0 = 0, s1 = 0, s2 = 0;
      for (Eigen::Index l = 0; l < n; ++l) {
        const double u = (x_(l) - x_(i)) / h_;
        const double k = std::exp(-0.5 * u * u);
        const double dx = x_(l) - x_(i);
        s0 += k;
        s1 += k * dx;
        s2 += k * dx * dx;
      }
      const double det = s0 * s2 - s1 * s1;
      const bool ok = det > 1e-12 * s0 * s2 && s2 > 0;
      for (Eigen::Index l = 0; l < n; ++l) {
        const double u = (x_(l) - x_(i)) / h_;
        const double k = std::exp(-0.5 * u * u);
        const double dx = x_(l) - x_(i);
        hat_(i, l) = ok ? k * (s2 - dx * s1) / det : k / s0;
      }
    }
    trace_ = hat_.trace();
  }

  SmootherKind kind_ = SmootherKind::OrthogonalSeries;
  BasisKind basis_kind_ = BasisKind::Cosine;
  bool centered_ = false;
  int d_ = 0;
  double h_ = 0.0;
  double trace_ = 0.0;
  Eigen::VectorXd x_;
  Eigen::MatrixXd psi_;
  Eigen::RowVectorXd col_means_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd hat_;
};

inline FittedSmoother fit_smoother(const SmootherSpec& spec, const Eigen::VectorXd& x) {
  return FittedSmoother::fit(spec, x);
}

}  // namespace spam
