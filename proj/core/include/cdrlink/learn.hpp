#pragma once

// Binary classifiers on standardized pair features: balanced sampling,
// L1/L2-regularised logistic regression and squared-hinge linear SVM,
// exact kNN, feature selection, cross-validation and seed ensembles.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "cdrlink/featurize.hpp"
#include "cdrlink/platt.hpp"

namespace cdrlink {

enum class ModelKind : std::uint8_t { logreg, linear_svm, knn };
enum class Penalty : std::uint8_t { l1, l2 };
enum class FeatureSelection : std::uint8_t { none, lr_l1, lsvm_l1 };

const char* to_string(ModelKind kind);
const char* to_string(Penalty penalty);
const char* to_string(FeatureSelection selection);
ModelKind parse_model_kind(std::string_view text);  // logreg | lsvm | knn
FeatureSelection parse_feature_selection(std::string_view text);  // none | lr-l1 | lsvm-l1

struct LabeledDataset {
  FeatureMatrix x;
  std::vector<int> y;                 // 0 / 1
  std::vector<std::string> groups;    // relationship code, may be empty
  std::vector<std::string> row_ids;

  std::size_t size() const { return y.size(); }
  /// Throws std::invalid_argument on inconsistent lengths or non-binary labels.
  void validate() const;
  LabeledDataset subset(std::span<const std::size_t> rows) const;
  /// {count of 0, count of 1}
  std::array<std::size_t, 2> class_counts() const;
};

struct TrainedModel {
  ModelKind kind = ModelKind::linear_svm;
  Penalty penalty = Penalty::l2;
  double c = 1.0;
  std::size_t k = 0;
  Eigen::VectorXd weights;  // full feature dimension; zero outside selected_features
  double bias = 0.0;
  std::vector<std::size_t> selected_features;  // ascending; empty means all
  std::optional<PlattParams> calibration;
  // kNN keeps its (column-selected) training set.
  std::shared_ptr<const FeatureMatrix> knn_x;
  std::shared_ptr<const std::vector<int>> knn_y;

  bool is_linear() const { return kind != ModelKind::knn; }
  /// x * weights + bias. Throws for kNN.
  Eigen::VectorXd decision_function(const FeatureMatrix& x) const;
  std::vector<int> predict(const FeatureMatrix& x) const;
  /// Platt probabilities for calibrated linear models, vote shares for kNN,
  /// nullopt for uncalibrated linear models.
  std::optional<std::vector<double>> probabilities(const FeatureMatrix& x) const;
};

// ---------------------------------------------------------------------------
// Sampling

/// n_train / 2 rows per class without replacement, deterministic in `seed`.
/// Throws std::invalid_argument when a class is too small or n_train is odd.
std::vector<std::size_t> balanced_sample(std::span<const int> labels, std::size_t n_train, std::uint64_t seed);
LabeledDataset balanced_sample(const LabeledDataset& pool, std::size_t n_train, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Linear models

struct TrainOptions {
  Penalty penalty = Penalty::l2;
  double c = 1.0;
  int max_iter = 1000;
  double tol = 1e-6;  // on the norm of the proximal gradient map
};

struct TrainDiagnostics {
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
  double gradient_map_norm = 0.0;
};

/// Mean loss (no penalty) of a linear model; labels are 0/1.
double linear_loss(ModelKind kind, const FeatureMatrix& x, std::span<const int> y, const Eigen::VectorXd& w, double b);

/// Regularised objective and the gradient of its smooth part
/// (mean loss, plus the L2 term when penalty is l2).
struct ObjectiveValue {
  double value = 0.0;
  Eigen::VectorXd grad_w;
  double grad_b = 0.0;
};
ObjectiveValue linear_objective(ModelKind kind, const FeatureMatrix& x, std::span<const int> y,
                                const Eigen::VectorXd& w, double b, Penalty penalty, double c);

/// Full-batch accelerated proximal gradient from a zero start. `seed` is
/// accepted for interface symmetry; a zero start makes fits seed-independent.
TrainedModel train_logreg(const LabeledDataset& train, const TrainOptions& options, std::uint64_t seed = 0,
                          TrainDiagnostics* diagnostics = nullptr);
TrainedModel train_linear_svm(const LabeledDataset& train, const TrainOptions& options, std::uint64_t seed = 0,
                              TrainDiagnostics* diagnostics = nullptr);
TrainedModel train_linear(ModelKind kind, const LabeledDataset& train, const TrainOptions& options,
                          TrainDiagnostics* diagnostics = nullptr);

/// Indices with |weight| >= threshold. Throws for kNN ("not a linear model").
std::vector<std::size_t> select_features(const TrainedModel& model, double threshold = 1e-5);

// ---------------------------------------------------------------------------
// kNN

/// Indices of the `k` nearest training rows for every query row, ordered by
/// (squared Euclidean distance, training index).
std::vector<std::vector<std::size_t>> knn_neighbors(const FeatureMatrix& train_x, const FeatureMatrix& query,
                                                    std::size_t k, std::size_t jobs = 1);

/// Majority vote of the first k neighbours; ties go to label 0.
int knn_vote(std::span<const std::size_t> neighbors, std::span<const int> train_y, std::size_t k);

/// Throws on an empty training set or k outside [1, train size].
std::vector<int> knn_predict(const FeatureMatrix& train_x, std::span<const int> train_y, const FeatureMatrix& query,
                             std::size_t k, std::size_t jobs = 1);

TrainedModel make_knn_model(const LabeledDataset& train, std::size_t k);

// ---------------------------------------------------------------------------
// Model selection

/// C values for linear models.
std::vector<double> default_c_grid();
/// k values for kNN.
std::vector<double> default_k_grid();

/// Fold index (0..n_folds-1) per row; classes are spread evenly across folds.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t n_folds, std::uint64_t seed);

struct CvResult {
  std::size_t best_index = 0;
  double best_value = 0.0;
  std::vector<double> mean_accuracy;  // per grid cell; NaN where the cell was infeasible
  TrainedModel model;                 // refit on the full training set
};

/// Five-fold stratified CV over `grid` (C for linear kinds, k for kNN),
/// maximising mean fold accuracy; ties go to the smaller grid index.
CvResult cross_validate(const LabeledDataset& train, ModelKind kind, Penalty penalty, std::span<const double> grid,
                        std::uint64_t seed, std::size_t jobs = 1);

// ---------------------------------------------------------------------------
// Seed ensembles

struct PipelineConfig {
  ModelKind model = ModelKind::linear_svm;
  Penalty penalty = Penalty::l2;
  FeatureSelection selection = FeatureSelection::none;
  std::size_t n_train = 2000;
  std::vector<double> grid;  // empty: default grid for the model kind
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  bool calibrate = true;
  double select_threshold = 1e-5;
  std::size_t jobs = 1;
};

struct EnsembleMember {
  std::uint64_t seed = 0;
  TrainedModel model;
  std::vector<double> cv_accuracy;
  double best_value = 0.0;
  std::vector<std::string> train_row_ids;
};

/// One seed's pipeline: balanced sample -> optional L1 selection -> CV -> refit -> calibration.
EnsembleMember fit_member(const LabeledDataset& pool, const PipelineConfig& config, std::uint64_t seed);

/// Per-row mode of the member votes; throws for an even member count ("mode may tie").
std::vector<int> mode_vote(std::span<const std::vector<int>> votes);

struct EnsemblePrediction {
  std::vector<int> labels;
  std::optional<std::vector<double>> probabilities;  // mean of member probabilities
};

EnsemblePrediction predict_ensemble(std::span<const EnsembleMember> members, const FeatureMatrix& x);

struct EnsembleResult {
  std::vector<EnsembleMember> members;
  EnsemblePrediction prediction;
};

EnsembleResult seed_ensemble(const LabeledDataset& pool, const FeatureMatrix& test_x, const PipelineConfig& config);

}  // namespace cdrlink
