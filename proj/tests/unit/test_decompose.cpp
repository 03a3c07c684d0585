#include <random>
#include <sstream>

#include <Eigen/QR>
#include <gtest/gtest.h>

#include "cdrlink/decompose.hpp"
#include "cdrlink/synthgen.hpp"
#include "varimax_oracle.hpp"

using namespace cdrlink;

namespace {

FeatureMatrix random_standardized(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd mix(d, d);
  for (Eigen::Index i = 0; i < mix.size(); ++i) mix.data()[i] = z(rng);
  FeatureMatrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
  x = x * mix;
  return apply_scaler(x, fit_scaler(x));
}

Eigen::MatrixXd random_loadings(std::size_t p, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  Eigen::MatrixXd l(p, k);
  for (Eigen::Index i = 0; i < l.size(); ++i) l.data()[i] = u(rng);
  return l;
}

}  // namespace

TEST(Pca, ReconstructsCovariance) {
  const auto x = random_standardized(500, 12, 1);
  const auto r = pca(x);
  const Eigen::MatrixXd cov = covariance_matrix(x);
  EXPECT_NEAR(cov.trace(), 12.0, 1e-9);
  const Eigen::MatrixXd back = r.components * r.eigenvalues.asDiagonal() * r.components.transpose();
  EXPECT_LT((back - cov).norm(), 1e-8);
  EXPECT_LT((r.components.transpose() * r.components - Eigen::MatrixXd::Identity(12, 12)).norm(), 1e-8);
  for (Eigen::Index j = 1; j < 12; ++j) EXPECT_GE(r.eigenvalues(j - 1), r.eigenvalues(j));
  EXPECT_NEAR(r.explained_variance_ratio.sum(), 1.0, 1e-12);
  for (Eigen::Index j = 0; j < 12; ++j) {
    Eigen::Index arg = 0;
    r.components.col(j).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(r.components(arg, j), 0.0);
  }
  EXPECT_THROW(pca(FeatureMatrix::Zero(1, 3)), std::invalid_argument);
}

TEST(Pca, ScreeAndLoadings) {
  const auto x = random_standardized(300, 6, 2);
  const auto r = pca(x);
  const auto scree = scree_data(r);
  ASSERT_EQ(scree.size(), 6u);
  EXPECT_EQ(scree[0].component, 1u);
  EXPECT_NEAR(scree.back().cumulative, 1.0, 1e-12);
  const auto l = loadings(r, 3);
  EXPECT_EQ(l.cols(), 3);
  EXPECT_NEAR(l.col(0).squaredNorm(), r.eigenvalues(0), 1e-10);
  // Full loadings reproduce the correlation matrix.
  const auto full = loadings(r, 6);
  EXPECT_LT((full * full.transpose() - covariance_matrix(x)).norm(), 1e-8);
  EXPECT_THROW(loadings(r, 0), std::out_of_range);
  EXPECT_THROW(loadings(r, 7), std::out_of_range);
  std::ostringstream out;
  write_scree_csv(out, scree);
  EXPECT_EQ(out.str().substr(0, 27), "component,ratio,cumulative\n");
}

TEST(Varimax, PreservesCommunalitiesAndIsOrthogonal) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (bool kaiser : {true, false}) {
      const auto l = random_loadings(30, 2 + seed % 4, seed);
      const auto v = varimax(l, {1e-8, 2000, kaiser});
      const auto k = l.cols();
      EXPECT_LT((v.rotation.transpose() * v.rotation - Eigen::MatrixXd::Identity(k, k)).norm(), 1e-10);
      EXPECT_LT((v.rotated.rowwise().squaredNorm() - l.rowwise().squaredNorm()).cwiseAbs().maxCoeff(), 1e-6);
      EXPECT_LT((l * v.rotation - v.rotated).norm(), 1e-12);
      for (Eigen::Index j = 1; j < k; ++j)
        EXPECT_GE(v.rotated.col(j - 1).squaredNorm(), v.rotated.col(j).squaredNorm() - 1e-12);
      for (Eigen::Index j = 0; j < k; ++j) EXPECT_GE(v.rotated.col(j).sum(), 0.0);
      EXPECT_TRUE(v.converged);
    }
  }
}

TEST(Varimax, CriterionDoesNotDecreaseFromStart) {
  const auto l = random_loadings(40, 4, 77);
  const auto v = varimax(l, {1e-8, 500, false});
  EXPECT_GE(varimax_criterion(v.rotated), varimax_criterion(l) - 1e-12);
  ASSERT_FALSE(v.criterion_history.empty());
  EXPECT_NEAR(v.criterion_history.back(), varimax_criterion(v.rotated), 1e-8);
}

TEST(Varimax, MatchesTwoFactorAngleGrid) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (bool kaiser : {false, true}) {
      const auto l = random_loadings(25, 2, 100 + seed);
      const auto v = varimax(l, {1e-12, 5000, kaiser});
      const auto want = oracle::varimax_grid(l, kaiser);
      EXPECT_LT((v.rotated - want).cwiseAbs().maxCoeff(), 1e-4) << "seed " << seed << " kaiser " << kaiser;
    }
  }
}

TEST(Varimax, RecoversSimpleStructureUnderRotation) {
  Eigen::MatrixXd simple = Eigen::MatrixXd::Zero(9, 3);
  for (int i = 0; i < 9; ++i) simple(i, i / 3) = 0.8;
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(random_loadings(3, 3, 5)).householderQ();
  const auto v = varimax(simple * q, {1e-10, 1000, true});
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(v.rotated.row(i).cwiseAbs().maxCoeff(), 0.8, 1e-6);
  EXPECT_THROW(varimax(Eigen::MatrixXd::Ones(5, 1)), std::invalid_argument);
}

TEST(AssignFactors, CutoffAndOrdering) {
  Eigen::MatrixXd l(4, 2);
  l << 0.9, 0.1,
      -0.5, 0.45,
       0.2, -0.7,
       0.3, 0.35;
  const std::vector<std::string> names{"a", "b", "c", "d"};
  const auto a = assign_factors(l, names, 0.4);
  ASSERT_EQ(a.factors.size(), 2u);
  ASSERT_EQ(a.factors[0].size(), 2u);
  EXPECT_EQ(a.factors[0][0].feature, "a");
  EXPECT_EQ(a.factors[0][1].feature, "b");
  ASSERT_EQ(a.factors[1].size(), 1u);
  EXPECT_DOUBLE_EQ(a.factors[1][0].abs_loading, 0.7);
  ASSERT_EQ(a.unassigned.size(), 1u);
  EXPECT_EQ(a.unassigned[0].feature, "d");
  EXPECT_EQ(assign_factors(l, {}, 0.4).factors[0][0].feature, "f0");
  EXPECT_NE(factors_to_json(a, 0.4).find("\"cutoff\": 0.4"), std::string::npos);
}

TEST(PlantedFactors, RecoveredWithElbowAtFive) {
  const auto data = generate_planted_factors({5000, 3});
  const auto z = apply_scaler(data.table.values, fit_scaler(data.table.values));
  const auto r = pca(z);
  const auto v = varimax(loadings(r, kPlantedFactorCount));
  const auto assignment = assign_factors(v.rotated, feature_names(), 0.4);
  std::vector<int> assigned(kFeatureCount, -1);
  for (std::size_t f = 0; f < assignment.factors.size(); ++f)
    for (const auto& m : assignment.factors[f]) assigned[m.feature_index] = static_cast<int>(f);
  EXPECT_GE(planted_recovery(data.membership, assigned), 0.9);
  EXPECT_LT(r.explained_variance_ratio(5) / r.explained_variance_ratio(4), 0.5);
}
