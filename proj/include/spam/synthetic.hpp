#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "spam/dataset.hpp"
#include "spam/rng.hpp"

namespace spam {

enum class CovariateLaw { UniformIID };

//! Recipe for the synthetic benchmark generator: a p-dimensional design
//! with four signal components on columns 1-4 and Gaussian noise.
struct SyntheticSpec {
  Eigen::Index n = 150;
  Eigen::Index p = 200;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
  CovariateLaw covariate_law = CovariateLaw::UniformIID;
};

//! The four signal component functions. All but the first integrate to
//! zero under Uniform(0,1); the first one's mean is absorbed by the
//! model intercept.
struct SyntheticTruth {
  std::vector<int> support{1, 2, 3, 4};  // 1-based column indices
  double noise_sd = 1.0;
  std::uint64_t seed = 0;

  static double f1(double x) { return -2.0 * std::sin(2.0 * x); }
  static double f2(double x) { return x * x - 1.0 / 3.0; }
  static double f3(double x) { return x - 0.5; }
  static double f4(double x) { return std::exp(-x) + std::exp(-1.0) - 1.0; }

  static double component(int j, double x) {
    switch (j) {
      case 1: return f1(x);
      case 2: return f2(x);
      case 3: return f3(x);
      case 4: return f4(x);
      default: return 0.0;
    }
  }

  //! Mean of component j under X ~ Uniform(0,1).
  static double component_mean(int j) {
    return j == 1 ? std::cos(2.0) - 1.0 : 0.0;
  }

  //! Component j centered to mean zero under Uniform(0,1).
  static double centered_component(int j, double x) {
    return component(j, x) - component_mean(j);
  }
};

struct SyntheticData {
  Dataset data;
  SyntheticTruth truth;
};

//! Draw a synthetic regression dataset. Deterministic in the seed: the
//! design is filled column by column, then the noise vector.
inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.p < 4) throw std::invalid_argument("generate_synthetic: need p >= 4");
  if (spec.n < 1) throw std::invalid_argument("generate_synthetic: need n >= 1");
  if (!(spec.noise_sd > 0)) throw std::invalid_argument("generate_synthetic: noise_sd must be > 0");
  Rng rng(spec.seed);
  Eigen::MatrixXd X(spec.n, spec.p);
  for (Eigen::Index j = 0; j < spec.p; ++j) {
    for (Eigen::Index i = 0; i < spec.n; ++i) X(i, j) = rng.uniform01();
  }
  Eigen::VectorXd Y(spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    Y(i) = SyntheticTruth::f1(X(i, 0)) + SyntheticTruth::f2(X(i, 1)) +
           SyntheticTruth::f3(X(i, 2)) + SyntheticTruth::f4(X(i, 3)) +
           spec.noise_sd * rng.normal();
  }
  SyntheticData out;
  // Columns are already in [0,1]; keep the identity scale so component
  // evaluations line up with the generating functions exactly.
  out.data = make_dataset(std::move(X), std::move(Y), /*scale=*/false);
  out.truth.noise_sd = spec.noise_sd;
  out.truth.seed = spec.seed;
  return out;
}

struct AugmentedDataset {
  Dataset data;
  std::vector<int> appended_columns;  // 0-based indices of the irrelevant columns
};

//! Append known-irrelevant columns: n_uniform iid Uniform(0,1) draws and
//! n_permuted row-permuted copies of distinct original columns.
inline AugmentedDataset augment_irrelevant(const Dataset& input, int n_uniform,
                                           int n_permuted, std::uint64_t seed) {
  const Eigen::Index n = input.n(), p = input.p();
  if (n_uniform < 0 || n_permuted < 0) {
    throw std::invalid_argument("augment_irrelevant: counts must be >= 0");
  }
  if (n_permuted > p) {
    throw std::invalid_argument("augment_irrelevant: n_permuted = " +
                                std::to_string(n_permuted) + " exceeds p = " +
                                std::to_string(p));
  }
  Rng rng(seed);
  AugmentedDataset out;
  const Eigen::Index p_new = p + n_uniform + n_permuted;
  Eigen::MatrixXd X(n, p_new);
  X.leftCols(p) = input.X;
  std::vector<std::string> names = input.feature_names;

  Eigen::Index col = p;
  for (int k = 0; k < n_uniform; ++k, ++col) {
    for (Eigen::Index i = 0; i < n; ++i) X(i, col) = rng.uniform01();
    names.push_back("u" + std::to_string(k + 1));
  }

  // Choose distinct source columns, then permute rows independently.
  std::vector<Eigen::Index> sources(static_cast<std::size_t>(p));
  std::iota(sources.begin(), sources.end(), Eigen::Index{0});
  rng.shuffle(sources);
  for (int k = 0; k < n_permuted; ++k, ++col) {
    const Eigen::Index src = sources[static_cast<std::size_t>(k)];
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    rng.shuffle(perm);
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, col) = input.X(perm[static_cast<std::size_t>(i)], src);
    }
    names.push_back("perm_" + input.feature_names[static_cast<std::size_t>(src)]);
  }

  for (Eigen::Index j = p; j < p_new; ++j) out.appended_columns.push_back(static_cast<int>(j));
  // Input X is already stored on its fitting scale ([0,1] when the source
  // was scaled); appended columns share that convention, so no rescale.
  out.data = make_dataset(std::move(X), input.Y, /*scale=*/false, std::move(names),
                          input.response_name);
  // Preserve the original scaling metadata for the original columns.
  for (Eigen::Index j = 0; j < p; ++j) {
    out.data.column_scales[static_cast<std::size_t>(j)] =
        input.column_scales[static_cast<std::size_t>(j)];
    out.data.constant_column[static_cast<std::size_t>(j)] =
        input.constant_column[static_cast<std::size_t>(j)];
  }
  return out;
}

}  // namespace spam
