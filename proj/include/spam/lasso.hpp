#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "spam/errors.hpp"

namespace spam {

//! Cyclic coordinate-descent solver for
//!   min_b (1/2) ||Y - X b||^2 + lambda ||b||_1
//! Columns are normalized to unit length internally and coefficients are
//! reported on the original column scale. Convergence is declared when no
//! normalized coefficient moves by more than tol in a full cycle; the
//! tolerance is tight because this solver doubles as a reference for the
//! additive solvers.
inline Eigen::VectorXd lasso_cd(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                                double lambda, double tol = 1e-10,
                                int max_iters = 100000) {
  if (X.rows() != Y.size()) throw std::invalid_argument("lasso_cd: X/Y row mismatch");
  if (lambda < 0) throw std::invalid_argument("lasso_cd: lambda must be >= 0");
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::VectorXd norms(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    norms(j) = X.col(j).norm();
    if (!(norms(j) > 1e-14 * std::sqrt(static_cast<double>(n)) *
                         std::max(1.0, X.cwiseAbs().maxCoeff()))) {
      throw std::invalid_argument("lasso_cd: column " + std::to_string(j + 1) +
                                  " is zero, cannot normalize");
    }
  }
  Eigen::MatrixXd Xn = X;
  for (Eigen::Index j = 0; j < p; ++j) Xn.col(j) /= norms(j);

  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd resid = Y;
  for (int it = 0; it < max_iters; ++it) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double pj = Xn.col(j).dot(resid) + gamma(j);
      double next = 0.0;
      const double a = std::abs(pj);
      if (a > lambda) next = (1.0 - lambda / a) * pj;
      const double delta = next - gamma(j);
      if (delta != 0.0) {
        resid -= delta * Xn.col(j);
        gamma(j) = next;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    if (max_change < tol) break;
  }
  return gamma.array() / norms.array();
}

//! One factor group: a label and its n x d_j block of the design.
struct GroupedDesign {
  std::vector<std::pair<std::string, Eigen::MatrixXd>> groups;
  Eigen::VectorXd Y;
};

struct GroupedSolution {
  std::vector<Eigen::VectorXd> beta;  // original-coordinate coefficients per group
  double lambda = 0.0;
  double kkt_residual = 0.0;
  int n_iters = 0;
  bool converged = false;
};

//! Objective the blockwise solver descends. Groups are orthonormalized
//! before solving, so the penalty acts on the norm of each group's fitted
//! contribution (which is what the coefficient norm becomes once
//! X_j^T X_j = I):
//!   (1/2) ||Y - sum_j X_j b_j||^2 + lambda sum_j sqrt(d_j) ||X_j b_j||.
//! The value is independent of the orthonormal basis chosen per group.
inline double grouped_objective(const GroupedDesign& design,
                                const std::vector<Eigen::VectorXd>& beta,
                                double lambda) {
  Eigen::VectorXd fit = Eigen::VectorXd::Zero(design.Y.size());
  double pen = 0.0;
  for (std::size_t g = 0; g < design.groups.size(); ++g) {
    const Eigen::VectorXd contribution = design.groups[g].second * beta[g];
    fit += contribution;
    pen += std::sqrt(static_cast<double>(design.groups[g].second.cols())) *
           contribution.norm();
  }
  return 0.5 * (design.Y - fit).squaredNorm() + lambda * pen;
}

//! Blockwise coordinate descent for the grouped lasso. Each group is
//! orthonormalized by a thin QR so the per-block update has the closed
//! form [1 - lambda sqrt(d_j)/||S_j||]_+ S_j; coefficients are mapped
//! back to the original columns on output. The KKT residual reported is
//! the largest stationarity violation across blocks, measured in the
//! orthonormalized coordinates.
inline GroupedSolution grouped_lasso(const GroupedDesign& design, double lambda,
                                     double tol = 1e-10, int max_iters = 100000) {
  if (lambda < 0) throw std::invalid_argument("grouped_lasso: lambda must be >= 0");
  const Eigen::Index n = design.Y.size();
  const std::size_t G = design.groups.size();
  if (G == 0) throw std::invalid_argument("grouped_lasso: no groups");

  std::vector<Eigen::MatrixXd> Q(G);   // n x d_j orthonormal bases
  std::vector<Eigen::MatrixXd> R(G);   // d_j x d_j upper triangular
  std::vector<double> sqrt_d(G);
  for (std::size_t g = 0; g < G; ++g) {
    const auto& [label, Xg] = design.groups[g];
    if (Xg.rows() != n) {
      throw std::invalid_argument("grouped_lasso: group '" + label +
                                  "' row count differs from response");
    }
    if (Xg.cols() < 1) throw std::invalid_argument("grouped_lasso: empty group '" + label + "'");
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Xg);
    Eigen::MatrixXd thinQ = qr.householderQ() * Eigen::MatrixXd::Identity(n, Xg.cols());
    Eigen::MatrixXd r = qr.matrixQR().topRows(Xg.cols()).triangularView<Eigen::Upper>();
    const double dmax = r.diagonal().cwiseAbs().maxCoeff();
    if (!(r.diagonal().cwiseAbs().minCoeff() > 1e-10 * dmax) || !(dmax > 0)) {
      throw std::invalid_argument("grouped_lasso: group '" + label +
                                  "' is rank deficient after orthonormalization");
    }
    Q[g] = std::move(thinQ);
    R[g] = std::move(r);
    sqrt_d[g] = std::sqrt(static_cast<double>(Xg.cols()));
  }

  std::vector<Eigen::VectorXd> theta(G);
  for (std::size_t g = 0; g < G; ++g) theta[g] = Eigen::VectorXd::Zero(Q[g].cols());
  Eigen::VectorXd resid = design.Y;

  GroupedSolution sol;
  sol.lambda = lambda;
  for (int it = 0; it < max_iters; ++it) {
    double max_change = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      Eigen::VectorXd s = Q[g].transpose() * resid + theta[g];
      const double ns = s.norm();
      Eigen::VectorXd next = Eigen::VectorXd::Zero(s.size());
      if (ns > lambda * sqrt_d[g] && ns > 0) next = (1.0 - lambda * sqrt_d[g] / ns) * s;
      Eigen::VectorXd delta = next - theta[g];
      const double dmax = delta.cwiseAbs().maxCoeff();
      if (dmax > 0) {
        resid -= Q[g] * delta;
        theta[g] = std::move(next);
      }
      max_change = std::max(max_change, dmax);
    }
    sol.n_iters = it + 1;
    if (max_change < tol) {
      sol.converged = true;
      break;
    }
  }

  double kkt = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    Eigen::VectorXd grad = Q[g].transpose() * resid;  // X_j^T (Y - X beta), orthonormal coords
    const double nt = theta[g].norm();
    if (nt > 0) {
      kkt = std::max(kkt, (grad - lambda * sqrt_d[g] / nt * theta[g]).norm());
    } else {
      kkt = std::max(kkt, std::max(0.0, grad.norm() - lambda * sqrt_d[g]));
    }
  }
  sol.kkt_residual = kkt;

  sol.beta.resize(G);
  for (std::size_t g = 0; g < G; ++g) {
    sol.beta[g] = R[g].triangularView<Eigen::Upper>().solve(theta[g]);
  }
  return sol;
}

}  // namespace spam
