#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "cdrlink/bayesbound.hpp"
#include "cdrlink/learn.hpp"

using namespace cdrlink;

namespace {

LabeledDataset gaussian_data(std::size_t n, std::size_t dim, double separation, std::uint64_t seed) {
  auto d = sample_gaussian_classes(symmetric_oracle(dim, separation), n, seed);
  for (std::size_t i = 0; i < d.size(); ++i) d.row_ids.push_back("r" + std::to_string(i));
  return d;
}

double accuracy(const std::vector<int>& p, const std::vector<int>& y) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ok += p[i] == y[i];
  return static_cast<double>(ok) / static_cast<double>(p.size());
}

std::pair<Eigen::VectorXd, double> finite_difference(ModelKind kind, const LabeledDataset& d, const Eigen::VectorXd& w,
                                                     double b, Penalty pen, double c) {
  const double h = 1e-6;
  Eigen::VectorXd g(w.size());
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    Eigen::VectorXd wp = w, wm = w;
    wp(j) += h;
    wm(j) -= h;
    g(j) = (linear_objective(kind, d.x, d.y, wp, b, pen, c).value - linear_objective(kind, d.x, d.y, wm, b, pen, c).value) /
           (2 * h);
  }
  const double gb = (linear_objective(kind, d.x, d.y, w, b + h, pen, c).value -
                     linear_objective(kind, d.x, d.y, w, b - h, pen, c).value) /
                    (2 * h);
  return {g, gb};
}

}  // namespace

TEST(Dataset, ValidateAndSubset) {
  auto d = gaussian_data(20, 3, 2.0, 1);
  EXPECT_NO_THROW(d.validate());
  const std::vector<std::size_t> rows{3, 1};
  const auto s = d.subset(rows);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.row_ids[0], "r3");
  EXPECT_EQ(s.x.row(1), d.x.row(1));
  auto bad = d;
  bad.y[0] = 2;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = d;
  bad.y.pop_back();
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  const auto counts = d.class_counts();
  EXPECT_EQ(counts[0] + counts[1], 20u);
}

TEST(BalancedSample, ExactCountsDeterministicNoRepeats) {
  std::vector<int> y(100, 0);
  for (int i = 0; i < 30; ++i) y[static_cast<std::size_t>(i * 3)] = 1;
  const auto a = balanced_sample(y, 40, 9);
  EXPECT_EQ(a, balanced_sample(y, 40, 9));
  EXPECT_NE(a, balanced_sample(y, 40, 10));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 40u);
  std::size_t ones = 0;
  for (auto i : a) ones += static_cast<std::size_t>(y[i]);
  EXPECT_EQ(ones, 20u);
  EXPECT_THROW(balanced_sample(y, 62, 1), std::invalid_argument);
  EXPECT_THROW(balanced_sample(y, 41, 1), std::invalid_argument);
  EXPECT_NO_THROW(balanced_sample(y, 60, 1));
}

TEST(Objective, GradientMatchesFiniteDifferences) {
  const auto d = gaussian_data(80, 5, 1.0, 2);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 0.5);
  for (ModelKind kind : {ModelKind::logreg, ModelKind::linear_svm}) {
    for (Penalty pen : {Penalty::l1, Penalty::l2}) {
      Eigen::VectorXd w(5);
      for (auto& v : w) v = z(rng);
      const double b = z(rng);
      const auto obj = linear_objective(kind, d.x, d.y, w, b, pen, 0.7);
      // The L1 term is not smooth: differentiate the loss only.
      const Penalty fd_pen = pen == Penalty::l1 ? Penalty::l1 : Penalty::l2;
      auto [g, gb] = finite_difference(kind, d, w, b, fd_pen, 0.7);
      if (pen == Penalty::l1) g -= (1.0 / 0.7) * w.cwiseSign();
      EXPECT_LT((obj.grad_w - g).norm(), 1e-4 * std::max(1.0, g.norm()));
      EXPECT_NEAR(obj.grad_b, gb, 1e-4);
    }
  }
}

TEST(Train, L2StationaryPoint) {
  const auto d = gaussian_data(400, 6, 1.5, 4);
  for (ModelKind kind : {ModelKind::logreg, ModelKind::linear_svm}) {
    TrainDiagnostics diag;
    const auto m = train_linear(kind, d, {Penalty::l2, 1.0, 5000, 1e-8}, &diag);
    EXPECT_TRUE(diag.converged);
    const auto obj = linear_objective(kind, d.x, d.y, m.weights, m.bias, Penalty::l2, 1.0);
    EXPECT_LT(std::hypot(obj.grad_w.norm(), obj.grad_b), 1e-5) << to_string(kind);
    EXPECT_NEAR(diag.objective, obj.value, 1e-10);
    EXPECT_GT(accuracy(m.predict(d.x), d.y), 0.7);
  }
}

TEST(Train, L1OptimalityConditions) {
  const auto d = gaussian_data(300, 10, 1.0, 5);
  const double c = 0.05;
  for (ModelKind kind : {ModelKind::logreg, ModelKind::linear_svm}) {
    const auto m = train_linear(kind, d, {Penalty::l1, c, 20000, 1e-9});
    const auto obj = linear_objective(kind, d.x, d.y, m.weights, m.bias, Penalty::l1, c);
    const double lambda = 1.0 / c;
    EXPECT_LT(std::abs(obj.grad_b), 1e-5);
    std::size_t zeros = 0;
    for (Eigen::Index j = 0; j < m.weights.size(); ++j) {
      if (m.weights(j) == 0.0) {
        ++zeros;
        EXPECT_LE(std::abs(obj.grad_w(j)), lambda + 1e-6);
      } else {
        EXPECT_NEAR(obj.grad_w(j), -lambda * (m.weights(j) > 0 ? 1.0 : -1.0), 1e-5);
      }
    }
    EXPECT_GT(zeros, 0u) << "strong L1 penalty should zero some weights";
  }
}

TEST(Train, LabelFlipAntisymmetry) {
  auto d = gaussian_data(200, 4, 1.2, 6);
  auto flipped = d;
  for (int& v : flipped.y) v = 1 - v;
  for (ModelKind kind : {ModelKind::logreg, ModelKind::linear_svm}) {
    for (Penalty pen : {Penalty::l1, Penalty::l2}) {
      const TrainOptions o{pen, 0.5, 20000, 1e-10};
      const auto a = train_linear(kind, d, o);
      const auto b = train_linear(kind, flipped, o);
      EXPECT_LT((a.weights + b.weights).norm(), 1e-6);
      EXPECT_NEAR(a.bias, -b.bias, 1e-6);
    }
  }
}

TEST(Train, RejectsSingleClass) {
  auto d = gaussian_data(20, 2, 1.0, 7);
  std::fill(d.y.begin(), d.y.end(), 1);
  EXPECT_THROW(train_logreg(d, {}), std::invalid_argument);
}

TEST(SelectFeatures, ThresholdAndKnnRejected) {
  TrainedModel m;
  m.weights = Eigen::VectorXd(4);
  m.weights << 0.0, 1e-5, -2e-5, 9.9e-6;
  EXPECT_EQ(select_features(m, 1e-5), (std::vector<std::size_t>{1, 2}));
  m.kind = ModelKind::knn;
  EXPECT_THROW(select_features(m), std::invalid_argument);
}

TEST(Knn, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> grid(0, 3);  // integer grid forces distance ties
  FeatureMatrix train(60, 2), query(25, 2);
  std::vector<int> y(60);
  for (Eigen::Index i = 0; i < 60; ++i) {
    train(i, 0) = grid(rng);
    train(i, 1) = grid(rng);
    y[static_cast<std::size_t>(i)] = static_cast<int>(rng() % 2);
  }
  for (Eigen::Index i = 0; i < 25; ++i) query(i, 0) = grid(rng), query(i, 1) = grid(rng);
  for (std::size_t k : {1u, 4u, 7u}) {
    const auto nn = knn_neighbors(train, query, k, 3);
    const auto pred = knn_predict(train, y, query, k);
    for (Eigen::Index q = 0; q < 25; ++q) {
      std::vector<std::pair<double, std::size_t>> all;
      for (Eigen::Index i = 0; i < 60; ++i) all.push_back({(train.row(i) - query.row(q)).squaredNorm(), i});
      std::sort(all.begin(), all.end());
      std::size_t ones = 0;
      for (std::size_t j = 0; j < k; ++j) {
        EXPECT_EQ(nn[static_cast<std::size_t>(q)][j], all[j].second);
        ones += static_cast<std::size_t>(y[all[j].second]);
      }
      EXPECT_EQ(pred[static_cast<std::size_t>(q)], 2 * ones > k ? 1 : 0);
    }
  }
  EXPECT_THROW(knn_predict(train, y, query, 0), std::invalid_argument);
  EXPECT_THROW(knn_predict(train, y, query, 61), std::invalid_argument);
}

TEST(Knn, VoteTieGoesToZero) {
  const std::vector<std::size_t> nn{0, 1};
  const std::vector<int> y{1, 0};
  EXPECT_EQ(knn_vote(nn, y, 2), 0);
  EXPECT_EQ(knn_vote(nn, y, 1), 1);
}

TEST(Knn, ModelProbabilitiesAreVoteShares) {
  const auto d = gaussian_data(50, 2, 2.0, 9);
  const auto m = make_knn_model(d, 5);
  const auto p = m.probabilities(d.x);
  ASSERT_TRUE(p);
  const auto pred = m.predict(d.x);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_NEAR((*p)[i] * 5.0, std::round((*p)[i] * 5.0), 1e-12);
    EXPECT_EQ(pred[i], (*p)[i] > 0.5 ? 1 : 0);
  }
  EXPECT_THROW(m.decision_function(d.x), std::logic_error);
}

TEST(Folds, Stratified) {
  std::vector<int> y(103, 0);
  for (std::size_t i = 0; i < 41; ++i) y[i * 2] = 1;
  const auto f = stratified_folds(y, 5, 1);
  std::map<std::size_t, std::array<int, 2>> counts;
  for (std::size_t i = 0; i < y.size(); ++i) ++counts[f[i]][static_cast<std::size_t>(y[i])];
  ASSERT_EQ(counts.size(), 5u);
  for (const auto& [fold, c] : counts) {
    EXPECT_GE(c[1], 8);
    EXPECT_LE(c[1], 9);
    EXPECT_GE(c[0], 12);
    EXPECT_LE(c[0], 13);
  }
  EXPECT_EQ(f, stratified_folds(y, 5, 1));
}

TEST(CrossValidate, PicksBestCellWithLowIndexTies) {
  const auto d = gaussian_data(200, 3, 2.0, 10);
  const std::vector<double> grid{1.0, 1.0, 1.0};
  const auto cv = cross_validate(d, ModelKind::logreg, Penalty::l2, grid, 1);
  EXPECT_EQ(cv.best_index, 0u);
  const std::vector<double> wide{1e-4, 1.0, 10.0};
  const auto cv2 = cross_validate(d, ModelKind::linear_svm, Penalty::l2, wide, 1);
  const auto best = std::max_element(cv2.mean_accuracy.begin(), cv2.mean_accuracy.end());
  EXPECT_EQ(cv2.best_index, static_cast<std::size_t>(best - cv2.mean_accuracy.begin()));
  EXPECT_EQ(cv2.best_value, wide[cv2.best_index]);
  EXPECT_EQ(cv2.model.c, wide[cv2.best_index]);

  const std::vector<double> ks{1, 3, 500};
  const auto cvk = cross_validate(d, ModelKind::knn, Penalty::l2, ks, 2);
  EXPECT_TRUE(std::isnan(cvk.mean_accuracy[2]));
  EXPECT_EQ(cvk.model.k, static_cast<std::size_t>(ks[cvk.best_index]));
}

TEST(Ensemble, ModeVote) {
  const std::vector<std::vector<int>> votes{{1, 0, 1}, {1, 1, 0}, {0, 0, 0}};
  EXPECT_EQ(mode_vote(votes), (std::vector<int>{1, 0, 0}));
  const std::vector<std::vector<int>> even{{1}, {0}};
  EXPECT_THROW(mode_vote(even), std::invalid_argument);
}

TEST(Ensemble, DeterministicAndCalibrated) {
  const auto pool = gaussian_data(600, 5, 1.5, 11);
  const auto test = gaussian_data(200, 5, 1.5, 12);
  PipelineConfig config;
  config.n_train = 200;
  config.seeds = {1, 2, 3};
  config.grid = {0.01, 1.0};
  const auto a = seed_ensemble(pool, test.x, config);
  const auto b = seed_ensemble(pool, test.x, config);
  EXPECT_EQ(a.prediction.labels, b.prediction.labels);
  ASSERT_TRUE(a.prediction.probabilities);
  EXPECT_EQ(*a.prediction.probabilities, *b.prediction.probabilities);
  EXPECT_EQ(a.members.size(), 3u);
  for (const auto& m : a.members) {
    EXPECT_TRUE(m.model.calibration);
    EXPECT_EQ(m.train_row_ids.size(), 200u);
  }
  EXPECT_GT(accuracy(a.prediction.labels, test.y), 0.7);
  for (double p : *a.prediction.probabilities) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(Ensemble, L1SelectionShrinksFeatureSet) {
  // Two informative columns plus pure noise.
  auto pool = gaussian_data(600, 2, 2.0, 13);
  std::mt19937_64 rng(14);
  std::normal_distribution<double> z;
  FeatureMatrix x(pool.size(), 12);
  x.leftCols(2) = pool.x;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 2; j < 12; ++j) x(i, j) = z(rng);
  pool.x = x;
  PipelineConfig config;
  config.n_train = 400;
  config.selection = FeatureSelection::lr_l1;
  config.seeds = {1};
  const auto m = fit_member(pool, config, 1);
  EXPECT_LT(m.model.selected_features.size(), 12u);
  EXPECT_TRUE(std::find(m.model.selected_features.begin(), m.model.selected_features.end(), 0) !=
              m.model.selected_features.end());
  for (Eigen::Index j = 0; j < 12; ++j) {
    if (std::find(m.model.selected_features.begin(), m.model.selected_features.end(), static_cast<std::size_t>(j)) ==
        m.model.selected_features.end())
      EXPECT_EQ(m.model.weights(j), 0.0);
  }
}

TEST(Parse, Names) {
  EXPECT_EQ(parse_model_kind("lsvm"), ModelKind::linear_svm);
  EXPECT_EQ(parse_model_kind("knn"), ModelKind::knn);
  EXPECT_EQ(parse_feature_selection("lr-l1"), FeatureSelection::lr_l1);
  EXPECT_THROW(parse_model_kind("tree"), std::invalid_argument);
}
