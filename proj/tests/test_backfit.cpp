#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "spam/backfit.hpp"
#include "spam/lasso.hpp"
#include "spam/model_json.hpp"
#include "spam/rng.hpp"
#include "spam/synthetic.hpp"

using Catch::Approx;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd random_vector(spam::Rng& rng, Eigen::Index n) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

MatrixXd random_unit_matrix(spam::Rng& rng, Eigen::Index n, Eigen::Index p) {
  MatrixXd X(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) X(i, j) = rng.uniform01();
  }
  return X;
}

spam::Dataset random_dataset(spam::Rng& rng, Eigen::Index n, Eigen::Index p,
                             double noise = 1.0) {
  MatrixXd X = random_unit_matrix(rng, n, p);
  VectorXd Y = (X.col(0).array() - 0.5).sin().matrix() * 2.0;
  if (p > 1) Y += (X.col(1).array().square() - 1.0 / 3.0).matrix();
  Y += noise * random_vector(rng, n);
  return spam::make_dataset(std::move(X), std::move(Y), /*scale=*/false);
}

MatrixXd centered_basis(const VectorXd& x, int d) {
  MatrixXd psi = spam::build_basis(x, d);
  psi.rowwise() -= psi.colwise().mean().eval();
  return psi;
}

}  // namespace

TEST_CASE("soft threshold hits its closed form") {
  SECTION("below the threshold everything is clipped to zero") {
    VectorXd p(4);
    p << 1, -1, 1, -1;  // s_hat = 1
    auto [f, s] = spam::soft_threshold_component(p, 1.0);
    CHECK(s == Approx(1.0));
    CHECK(f.cwiseAbs().maxCoeff() == 0.0);
    auto [f2, s2] = spam::soft_threshold_component(p, 2.0);
    CHECK(f2.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("zero penalty passes the input through unchanged") {
    VectorXd p(3);
    p << 0.3, -0.2, 0.9;
    auto [f, s] = spam::soft_threshold_component(p, 0.0);
    CHECK(f == p);
  }
  SECTION("pinned shrinkage example") {
    VectorXd p(4);
    p << 3, -3, 3, -3;  // s_hat = 3
    auto [f, s] = spam::soft_threshold_component(p, 1.0);
    CHECK(s == Approx(3.0));
    VectorXd want(4);
    want << 2, -2, 2, -2;
    CHECK((f - want).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("post-threshold norm identity") {
    spam::Rng rng(77);
    for (int rep = 0; rep < 200; ++rep) {
      const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(30));
      VectorXd p = random_vector(rng, n);
      const double lambda = rng.uniform01();
      auto [f, s] = spam::soft_threshold_component(p, lambda);
      if (s > lambda) {
        const double norm_f = std::sqrt(f.squaredNorm() / static_cast<double>(n));
        CHECK(norm_f == Approx(s - lambda).margin(1e-10));
      } else {
        CHECK(f.cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }
}

TEST_CASE("at lambda_max every component is thresholded away") {
  spam::Rng rng(101);
  spam::Dataset data = random_dataset(rng, 50, 6);
  spam::SmootherSpec spec;
  spec.truncation = 3;
  spam::ColumnSmoothers smoothers(data, spec, /*center_basis=*/true);
  const double lmax = spam::lambda_max(data, smoothers);

  spam::FitConfig cfg;
  cfg.smoother = spec;
  cfg.lambda = lmax;
  spam::SpamModel model = spam::fit_with_smoothers(data, cfg, smoothers);
  CHECK(model.active_set().empty());
  CHECK(model.converged);

  // Predictions collapse to the response mean.
  VectorXd pred = spam::predict(model, data.X);
  CHECK((pred.array() - data.Y.mean()).abs().maxCoeff() < 1e-12);

  // Just below lambda_max at least one component survives.
  cfg.lambda = lmax * 0.99;
  spam::SpamModel below = spam::fit_with_smoothers(data, cfg, smoothers);
  CHECK_FALSE(below.active_set().empty());
}

TEST_CASE("unpenalized series fit matches dense least squares on the joint basis") {
  spam::Rng rng(103);
  const Eigen::Index n = 50;
  const int d = 3;
  spam::Dataset data = random_dataset(rng, n, 2, 0.4);

  spam::FitConfig cfg;
  cfg.smoother.truncation = d;
  cfg.lambda = 0.0;
  cfg.tol = 1e-12;
  cfg.max_outer_iters = 5000;
  spam::SpamModel model = spam::fit(data, cfg);

  MatrixXd joint(n, 2 * d);
  joint.leftCols(d) = centered_basis(data.X.col(0), d);
  joint.rightCols(d) = centered_basis(data.X.col(1), d);
  VectorXd yc = data.Y.array() - data.Y.mean();
  VectorXd ls_fit = joint * joint.colPivHouseholderQr().solve(yc);

  VectorXd total = model.components[0].fitted + model.components[1].fitted;
  CHECK((total - ls_fit).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("series objective is non-increasing across sweeps") {
  spam::Rng rng(105);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(rng.below(40));
    const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng.below(6));
    spam::Dataset data = random_dataset(rng, n, p);
    spam::FitConfig cfg;
    cfg.smoother.truncation = 1 + static_cast<int>(rng.below(4));
    cfg.lambda = 0.5 * rng.uniform01();
    cfg.tol = 1e-9;
    cfg.max_outer_iters = 200;
    spam::SpamModel model = spam::fit(data, cfg);
    REQUIRE(model.objective_history.size() >= 2);
    for (std::size_t t = 1; t < model.objective_history.size(); ++t) {
      CHECK(model.objective_history[t] <= model.objective_history[t - 1] + 1e-10);
    }
  }
}

TEST_CASE("active components are centered and satisfy block stationarity") {
  spam::Rng rng(107);
  const Eigen::Index n = 60, p = 5;
  spam::Dataset data = random_dataset(rng, n, p, 0.5);
  spam::FitConfig cfg;
  cfg.smoother.truncation = 3;
  cfg.lambda = 0.05;
  cfg.tol = 1e-11;
  cfg.max_outer_iters = 5000;
  spam::SpamModel model = spam::fit(data, cfg);
  REQUIRE(model.converged);
  REQUIRE_FALSE(model.active_set().empty());

  VectorXd yc = data.Y.array() - data.Y.mean();
  VectorXd total = VectorXd::Zero(n);
  for (const auto& comp : model.components) total += comp.fitted;

  for (const auto& comp : model.components) {
    const VectorXd r_j = yc - total + comp.fitted;
    MatrixXd psi = centered_basis(data.X.col(comp.j), 3);
    if (comp.active) {
      CHECK(std::abs(comp.fitted.mean()) < 1e-8);
      const double norm_f = comp.fitted.norm();
      VectorXd grad = psi.transpose() * (r_j - comp.fitted) / static_cast<double>(n);
      VectorXd subgrad = cfg.lambda * (psi.transpose() * comp.fitted) /
                         (std::sqrt(static_cast<double>(n)) * norm_f);
      CHECK((grad - subgrad).norm() < 1e-6);
    } else {
      // Smoothed partial residual must sit at or below the threshold.
      MatrixXd proj = psi * (psi.transpose() * psi).ldlt().solve(psi.transpose().eval());
      VectorXd smoothed = proj * r_j;
      const double s = std::sqrt(smoothed.squaredNorm() / static_cast<double>(n));
      CHECK(s <= cfg.lambda + 1e-8);
    }
  }
}

TEST_CASE("identity-basis fit coincides with the coordinate-descent lasso") {
  spam::Rng rng(109);
  const Eigen::Index n = 40, p = 8;
  MatrixXd X = random_unit_matrix(rng, n, p);
  VectorXd beta_true = VectorXd::Zero(p);
  beta_true(0) = 2.0;
  beta_true(2) = -1.5;
  VectorXd Y = X * beta_true + 0.3 * random_vector(rng, n);
  spam::Dataset data = spam::make_dataset(X, Y, /*scale=*/false);

  spam::FitConfig cfg;
  cfg.smoother.basis = spam::BasisKind::Identity;
  cfg.smoother.truncation = 1;
  cfg.lambda = 0.05;
  cfg.tol = 1e-12;
  cfg.max_outer_iters = 20000;
  spam::SpamModel model = spam::fit(data, cfg);

  // Same problem in lasso coordinates: centered columns rescaled to unit
  // mean square, penalty scaled by sqrt(n).
  MatrixXd U(n, p);
  VectorXd rms(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    VectorXd c = X.col(j).array() - X.col(j).mean();
    rms(j) = std::sqrt(c.squaredNorm() / static_cast<double>(n));
    U.col(j) = c / rms(j);
  }
  VectorXd yc = Y.array() - Y.mean();
  VectorXd beta_lasso =
      spam::lasso_cd(U, yc, cfg.lambda * std::sqrt(static_cast<double>(n)), 1e-13);

  for (Eigen::Index j = 0; j < p; ++j) {
    const auto& comp = model.components[static_cast<std::size_t>(j)];
    const double spam_coef_on_u =
        comp.active ? comp.coefficients(0) * rms(j) : 0.0;
    CHECK(spam_coef_on_u == Approx(beta_lasso(j)).margin(1e-6));
    VectorXd lasso_fit_j = U.col(j) * beta_lasso(j);
    CHECK((comp.fitted - lasso_fit_j).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("column permutation permutes the recovered components") {
  spam::Rng rng(111);
  const Eigen::Index n = 60, p = 4;
  spam::Dataset data = random_dataset(rng, n, p, 0.5);
  spam::FitConfig cfg;
  cfg.smoother.truncation = 3;
  cfg.lambda = 0.08;
  cfg.tol = 1e-11;
  cfg.max_outer_iters = 5000;
  spam::SpamModel base = spam::fit(data, cfg);

  std::vector<int> perm = {2, 0, 3, 1};
  MatrixXd Xp(n, p);
  for (Eigen::Index j = 0; j < p; ++j) Xp.col(j) = data.X.col(perm[j]);
  spam::Dataset permuted = spam::make_dataset(Xp, data.Y, /*scale=*/false);
  spam::SpamModel shuffled = spam::fit(permuted, cfg);

  for (Eigen::Index j = 0; j < p; ++j) {
    const auto& a = shuffled.components[static_cast<std::size_t>(j)];
    const auto& b = base.components[static_cast<std::size_t>(perm[j])];
    CHECK(a.active == b.active);
    CHECK((a.fitted - b.fitted).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("prediction reproduces the training fit and expands the basis") {
  spam::Rng rng(113);
  spam::Dataset data = random_dataset(rng, 45, 3, 0.4);
  spam::FitConfig cfg;
  cfg.smoother.truncation = 3;
  cfg.lambda = 0.02;
  cfg.tol = 1e-10;
  cfg.max_outer_iters = 2000;
  spam::SpamModel model = spam::fit(data, cfg);

  SECTION("training points reproduce the stored fit") {
    VectorXd pred = spam::predict(model, data.X);
    VectorXd stored = VectorXd::Constant(data.n(), model.intercept);
    for (const auto& comp : model.components) stored += comp.fitted;
    CHECK((pred - stored).cwiseAbs().maxCoeff() < 1e-8);
  }

  SECTION("column count mismatch throws") {
    CHECK_THROWS_AS(spam::predict(model, MatrixXd::Zero(3, 2)), std::invalid_argument);
  }

  SECTION("hand-expanded cosine component") {
    spam::SpamModel manual;
    manual.intercept = 0.0;
    manual.smoother.kind = spam::SmootherKind::OrthogonalSeries;
    manual.smoother.basis = spam::BasisKind::Cosine;
    manual.smoother.truncation = 3;
    manual.column_scales = {{0.0, 1.0}};
    spam::ComponentFunction comp;
    comp.j = 0;
    comp.active = true;
    comp.coefficients = Eigen::Vector3d(0.5, -1.0, 0.25);
    comp.offset = 0.1;
    manual.components.push_back(comp);

    VectorXd probes(5);
    probes << 0.0, 0.21, 0.5, 0.77, 1.0;
    VectorXd got = spam::evaluate_component(manual, 0, probes);
    for (Eigen::Index i = 0; i < probes.size(); ++i) {
      const double x = probes(i);
      const double want = 0.1 +
                          0.5 * std::numbers::sqrt2 * std::cos(std::numbers::pi * x) -
                          1.0 * std::numbers::sqrt2 * std::cos(2 * std::numbers::pi * x) +
                          0.25 * std::numbers::sqrt2 * std::cos(3 * std::numbers::pi * x);
      CHECK(got(i) == Approx(want).margin(1e-10));
    }
  }
}

TEST_CASE("local linear backfitting fits and reproduces its training points") {
  spam::Rng rng(115);
  spam::Dataset data = random_dataset(rng, 40, 3, 0.3);
  spam::FitConfig cfg;
  cfg.smoother.kind = spam::SmootherKind::LocalLinear;
  cfg.smoother.bandwidth = 0.15;
  cfg.lambda = 0.02;
  cfg.tol = 1e-8;
  cfg.max_outer_iters = 500;
  spam::SpamModel model = spam::fit(data, cfg);
  CHECK(model.converged);
  for (const auto& comp : model.components) {
    if (comp.active) CHECK(std::abs(comp.fitted.mean()) < 1e-8);
  }
  VectorXd pred = spam::predict(model, data.X);
  VectorXd stored = VectorXd::Constant(data.n(), model.intercept);
  for (const auto& comp : model.components) stored += comp.fitted;
  CHECK((pred - stored).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("constant columns stay inactive") {
  spam::Rng rng(117);
  MatrixXd X = random_unit_matrix(rng, 30, 3);
  X.col(1).setConstant(0.4);
  VectorXd Y = 3.0 * (X.col(0).array() - 0.5).matrix() + 0.1 * random_vector(rng, 30);
  spam::Dataset data = spam::make_dataset(X, Y, /*scale=*/true);
  spam::FitConfig cfg;
  cfg.smoother.truncation = 3;
  cfg.lambda = 0.01;
  spam::SpamModel model = spam::fit(data, cfg);
  CHECK_FALSE(model.components[1].active);
  CHECK(model.components[0].active);
}

TEST_CASE("invalid inputs are rejected") {
  spam::FitConfig cfg;
  spam::Dataset empty;
  empty.X = MatrixXd(0, 0);
  empty.Y = VectorXd(0);
  CHECK_THROWS_AS(spam::fit(empty, cfg), std::invalid_argument);

  spam::Rng rng(119);
  spam::Dataset data = random_dataset(rng, 20, 2);
  data.X(3, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(spam::fit(data, cfg), std::invalid_argument);

  spam::Dataset ok = random_dataset(rng, 20, 2);
  cfg.lambda = -0.5;
  CHECK_THROWS_AS(spam::fit(ok, cfg), std::invalid_argument);
}

TEST_CASE("warm starts accelerate refits and validate their shape") {
  spam::Rng rng(121);
  spam::Dataset data = random_dataset(rng, 50, 5, 0.5);
  spam::FitConfig cfg;
  cfg.smoother.truncation = 3;
  cfg.lambda = 0.2;
  spam::SpamModel first = spam::fit(data, cfg);
  cfg.lambda = 0.18;
  spam::SpamModel warm = spam::fit(data, cfg, &first);
  spam::SpamModel cold = spam::fit(data, cfg);
  CHECK(warm.n_iters <= cold.n_iters + 1);

  spam::Dataset other = random_dataset(rng, 30, 2);
  CHECK_THROWS_AS(spam::fit(other, cfg, &first), std::invalid_argument);
}

TEST_CASE("model json round trip preserves predictions") {
  spam::Rng rng(123);
  spam::Dataset data = random_dataset(rng, 40, 3, 0.4);
  for (auto kind : {spam::SmootherKind::OrthogonalSeries, spam::SmootherKind::LocalLinear}) {
    spam::FitConfig cfg;
    cfg.smoother.kind = kind;
    cfg.smoother.truncation = 3;
    cfg.smoother.bandwidth = 0.2;
    cfg.lambda = 0.02;
    spam::SpamModel model = spam::fit(data, cfg);
    nlohmann::json j = spam::model_to_json(model);
    spam::SpamModel back = spam::model_from_json(j);
    MatrixXd probe = random_unit_matrix(rng, 15, 3);
    VectorXd a = spam::predict(model, probe);
    VectorXd b = spam::predict(back, probe);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(back.lambda == model.lambda);
    CHECK(back.converged == model.converged);
  }
}
