#pragma once

// Bounds on the Bayes error from the 1-NN error rate, and an exact
// two-Gaussian oracle to check them against.

#include <cstdint>
#include <string>
#include <vector>

#include "cdrlink/featurize.hpp"
#include "cdrlink/learn.hpp"

namespace cdrlink {

/// Fraction of test rows whose nearest training row (ties: lower index) has a different label.
double one_nn_error(const LabeledDataset& train, const LabeledDataset& test, std::size_t jobs = 1);

/// Leave-one-out variant on a single set: each row's neighbour excludes itself.
double one_nn_error_loo(const LabeledDataset& data, std::size_t jobs = 1);

struct BayesBounds {
  double e_nn = 0.0;
  double bayes_lower = 0.0;
  double bayes_upper = 0.0;
  double max_accuracy_lower = 0.0;
  double max_accuracy_upper = 0.0;
  bool clamped = false;  // e_nn was slightly above 0.5 and clamped
};

/// Throws std::invalid_argument for e_nn < 0 or e_nn > 0.52; values in (0.5, 0.52] are clamped.
BayesBounds bayes_bounds(double e_nn);

/// The e_nn at which the lower bound equals `lower` (inverse of the lower-bound formula).
double e_nn_for_lower_bound(double lower);

double standard_normal_cdf(double x);

struct GaussianClass {
  double prior = 0.5;
  std::vector<double> mean;
  double sigma = 1.0;  // isotropic standard deviation
};

struct GaussianClassOracle {
  GaussianClass negative;  // label 0
  GaussianClass positive;  // label 1
};

/// Exact Bayes error for two isotropic Gaussians sharing sigma.
/// Throws std::invalid_argument ("unsupported covariance structure") otherwise.
double gaussian_bayes_error(const GaussianClassOracle& oracle);

/// Draws n labelled points; labels follow the priors.
LabeledDataset sample_gaussian_classes(const GaussianClassOracle& oracle, std::size_t n, std::uint64_t seed);

/// Two classes with equal priors in `dim` dimensions whose means are `separation` apart.
GaussianClassOracle symmetric_oracle(std::size_t dim, double separation, double sigma = 1.0);

std::string bounds_to_json(const BayesBounds& bounds, std::size_t n_train, std::size_t n_test, std::uint64_t seed);

}  // namespace cdrlink
