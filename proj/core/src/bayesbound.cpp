#include "cdrlink/bayesbound.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cdrlink/random.hpp"

namespace cdrlink {

double one_nn_error(const LabeledDataset& train, const LabeledDataset& test, std::size_t jobs) {
  train.validate();
  test.validate();
  if (train.size() == 0 || test.size() == 0) throw std::invalid_argument("one_nn_error: empty set");
  if (train.x.cols() != test.x.cols()) throw std::invalid_argument("one_nn_error: dimension mismatch");
  const auto neighbors = knn_neighbors(train.x, test.x, 1, jobs);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < neighbors.size(); ++i) errors += train.y[neighbors[i][0]] != test.y[i] ? 1 : 0;
  return static_cast<double>(errors) / static_cast<double>(test.size());
}

double one_nn_error_loo(const LabeledDataset& data, std::size_t jobs) {
  data.validate();
  if (data.size() < 2) throw std::invalid_argument("one_nn_error_loo: needs at least two rows");
  // Two neighbours per row; drop the row itself (or its first exact duplicate in index order).
  const auto neighbors = knn_neighbors(data.x, data.x, 2, jobs);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    const std::size_t nn = neighbors[i][0] == i ? neighbors[i][1] : neighbors[i][0];
    errors += data.y[nn] != data.y[i] ? 1 : 0;
  }
  return static_cast<double>(errors) / static_cast<double>(data.size());
}

BayesBounds bayes_bounds(double e_nn) {
  if (!(e_nn >= 0.0)) throw std::invalid_argument("e_nn must be non-negative");
  BayesBounds b;
  if (e_nn > 0.5) {
    if (e_nn > 0.52) throw std::invalid_argument("bound formula undefined; check label/feature pairing");
    e_nn = 0.5;
    b.clamped = true;
  }
  b.e_nn = e_nn;
  b.bayes_lower = (1.0 - std::sqrt(1.0 - 2.0 * e_nn)) / 2.0;
  b.bayes_upper = e_nn;
  b.max_accuracy_lower = 1.0 - b.bayes_upper;
  b.max_accuracy_upper = 1.0 - b.bayes_lower;
  return b;
}

double e_nn_for_lower_bound(double lower) {
  if (!(lower >= 0.0 && lower <= 0.5)) throw std::invalid_argument("lower bound must lie in [0, 0.5]");
  return 2.0 * lower * (1.0 - lower);
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double gaussian_bayes_error(const GaussianClassOracle& oracle) {
  const auto& n = oracle.negative;
  const auto& p = oracle.positive;
  if (n.mean.size() != p.mean.size() || n.mean.empty()) throw std::invalid_argument("class means differ in dimension");
  if (n.sigma != p.sigma || !(n.sigma > 0.0)) throw std::invalid_argument("unsupported covariance structure");
  if (!(n.prior > 0.0 && p.prior > 0.0) || std::abs(n.prior + p.prior - 1.0) > 1e-12) {
    throw std::invalid_argument("priors must be positive and sum to 1");
  }
  double d2 = 0.0;
  for (std::size_t j = 0; j < n.mean.size(); ++j) d2 += (p.mean[j] - n.mean[j]) * (p.mean[j] - n.mean[j]);
  const double d = std::sqrt(d2);
  if (d == 0.0) return std::min(n.prior, p.prior);
  // Project onto the mean difference; decide positive when t > threshold.
  const double s = n.sigma;
  const double threshold = d / 2.0 + s * s * std::log(n.prior / p.prior) / d;
  return n.prior * (1.0 - standard_normal_cdf(threshold / s)) + p.prior * standard_normal_cdf((threshold - d) / s);
}

LabeledDataset sample_gaussian_classes(const GaussianClassOracle& oracle, std::size_t n, std::uint64_t seed) {
  const std::size_t dim = oracle.negative.mean.size();
  if (oracle.positive.mean.size() != dim) throw std::invalid_argument("class means differ in dimension");
  Rng rng(derive_seed(seed, 0x6A));
  std::bernoulli_distribution pick(oracle.positive.prior);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledDataset out;
  out.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  out.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = pick(rng) ? 1 : 0;
    const GaussianClass& c = label == 1 ? oracle.positive : oracle.negative;
    out.y[i] = label;
    for (std::size_t j = 0; j < dim; ++j) {
      out.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c.mean[j] + c.sigma * normal(rng);
    }
  }
  return out;
}

GaussianClassOracle symmetric_oracle(std::size_t dim, double separation, double sigma) {
  if (dim == 0) throw std::invalid_argument("dimension must be positive");
  GaussianClassOracle o;
  o.negative.mean.assign(dim, 0.0);
  o.positive.mean.assign(dim, 0.0);
  o.negative.mean[0] = -separation / 2.0;
  o.positive.mean[0] = separation / 2.0;
  o.negative.sigma = o.positive.sigma = sigma;
  return o;
}

std::string bounds_to_json(const BayesBounds& b, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["e_nn"] = b.e_nn;
  j["bayes_lower"] = b.bayes_lower;
  j["bayes_upper"] = b.bayes_upper;
  j["max_accuracy_lower"] = b.max_accuracy_lower;
  j["max_accuracy_upper"] = b.max_accuracy_upper;
  j["clamped"] = b.clamped;
  j["n_train"] = n_train;
  j["n_test"] = n_test;
  j["seed"] = seed;
  return j.dump(2);
}

}  // namespace cdrlink
