#include "cdrlink/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "cdrlink/parallel.hpp"
#include "cdrlink/random.hpp"

namespace cdrlink {

namespace {

constexpr std::size_t kFolds = 5;

double sign_of(int label) { return label == 1 ? 1.0 : -1.0; }

FeatureMatrix select_columns(const FeatureMatrix& x, std::span<const std::size_t> columns) {
  if (columns.empty()) return x;
  FeatureMatrix out(x.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(columns[j]));
  }
  return out;
}

void require_both_classes(std::span<const int> y) {
  const bool has0 = std::find(y.begin(), y.end(), 0) != y.end();
  const bool has1 = std::find(y.begin(), y.end(), 1) != y.end();
  if (!has0 || !has1) throw std::invalid_argument("training set contains a single class");
}

/// Loss and d(loss)/d(margin) for one margin.
struct MarginLoss {
  double loss;
  double slope;
};

MarginLoss margin_loss(ModelKind kind, double m) {
  if (kind == ModelKind::logreg) {
    if (m > 0.0) {
      const double e = std::exp(-m);
      return {std::log1p(e), -e / (1.0 + e)};
    }
    const double e = std::exp(m);
    return {-m + std::log1p(e), -1.0 / (1.0 + e)};
  }
  const double slack = 1.0 - m;
  if (slack <= 0.0) return {0.0, 0.0};
  return {slack * slack, -2.0 * slack};
}

/// Smooth part of the objective over theta = [w; b].
class SmoothObjective {
 public:
  SmoothObjective(ModelKind kind, const FeatureMatrix& x, std::span<const int> y, Penalty penalty, double lambda)
      : kind_(kind), x_(x), penalty_(penalty), lambda_(lambda), signs_(static_cast<Eigen::Index>(y.size())) {
    for (std::size_t i = 0; i < y.size(); ++i) signs_(static_cast<Eigen::Index>(i)) = sign_of(y[i]);
  }

  Eigen::Index dim() const { return x_.cols(); }

  double value(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd margins = margins_of(theta);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) sum += margin_loss(kind_, margins(i)).loss;
    return sum / static_cast<double>(margins.size()) + l2_term(theta);
  }

  double value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
    const Eigen::VectorXd margins = margins_of(theta);
    const double n = static_cast<double>(margins.size());
    Eigen::VectorXd coef(margins.size());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
      const MarginLoss ml = margin_loss(kind_, margins(i));
      sum += ml.loss;
      coef(i) = ml.slope * signs_(i) / n;
    }
    grad.resize(theta.size());
    grad.head(dim()) = x_.transpose() * coef;
    grad(dim()) = coef.sum();
    if (penalty_ == Penalty::l2) grad.head(dim()) += lambda_ * theta.head(dim());
    return sum / n + l2_term(theta);
  }

  /// Largest eigenvalue of [X 1]^T [X 1] / n by power iteration.
  double gram_norm_estimate() const {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(dim() + 1).normalized();
    double estimate = 0.0;
    for (int it = 0; it < 50; ++it) {
      const Eigen::VectorXd xv = x_ * v.head(dim()) + Eigen::VectorXd::Constant(x_.rows(), v(dim()));
      Eigen::VectorXd next(dim() + 1);
      next.head(dim()) = x_.transpose() * xv;
      next(dim()) = xv.sum();
      next /= static_cast<double>(x_.rows());
      estimate = next.norm();
      if (estimate == 0.0) break;
      v = next / estimate;
    }
    return estimate;
  }

  double curvature() const { return kind_ == ModelKind::logreg ? 0.25 : 2.0; }

 private:
  Eigen::VectorXd margins_of(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd scores = x_ * theta.head(dim());
    scores.array() += theta(dim());
    return scores.cwiseProduct(signs_);
  }

  double l2_term(const Eigen::VectorXd& theta) const {
    return penalty_ == Penalty::l2 ? 0.5 * lambda_ * theta.head(dim()).squaredNorm() : 0.0;
  }

  ModelKind kind_;
  const FeatureMatrix& x_;
  Penalty penalty_;
  double lambda_;
  Eigen::VectorXd signs_;
};

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double amount, Eigen::Index dim) {
  Eigen::VectorXd out = v;
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double a = std::abs(v(j)) - amount;
    out(j) = a > 0.0 ? std::copysign(a, v(j)) : 0.0;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::logreg: return "logreg";
    case ModelKind::linear_svm: return "lsvm";
    case ModelKind::knn: return "knn";
  }
  return "?";
}

const char* to_string(Penalty penalty) { return penalty == Penalty::l1 ? "l1" : "l2"; }

const char* to_string(FeatureSelection selection) {
  switch (selection) {
    case FeatureSelection::none: return "none";
    case FeatureSelection::lr_l1: return "lr-l1";
    case FeatureSelection::lsvm_l1: return "lsvm-l1";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "logreg") return ModelKind::logreg;
  if (text == "lsvm") return ModelKind::linear_svm;
  if (text == "knn") return ModelKind::knn;
  throw std::invalid_argument(fmt::format("unknown model kind '{}'", text));
}

FeatureSelection parse_feature_selection(std::string_view text) {
  if (text == "none") return FeatureSelection::none;
  if (text == "lr-l1") return FeatureSelection::lr_l1;
  if (text == "lsvm-l1") return FeatureSelection::lsvm_l1;
  throw std::invalid_argument(fmt::format("unknown feature selection '{}'", text));
}

void LabeledDataset::validate() const {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (x.rows() != n || (!groups.empty() && groups.size() != y.size()) ||
      (!row_ids.empty() && row_ids.size() != y.size())) {
    throw std::invalid_argument("dataset fields have inconsistent row counts");
  }
  if (std::any_of(y.begin(), y.end(), [](int v) { return v != 0 && v != 1; })) {
    throw std::invalid_argument("dataset labels must be 0 or 1");
  }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  LabeledDataset out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.y.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    out.y.push_back(y.at(rows[i]));
    if (!groups.empty()) out.groups.push_back(groups[rows[i]]);
    if (!row_ids.empty()) out.row_ids.push_back(row_ids[rows[i]]);
  }
  return out;
}

std::array<std::size_t, 2> LabeledDataset::class_counts() const {
  const auto ones = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  return {y.size() - ones, ones};
}

Eigen::VectorXd TrainedModel::decision_function(const FeatureMatrix& x) const {
  if (!is_linear()) throw std::logic_error("decision_function: not a linear model");
  if (x.cols() != weights.size()) throw std::invalid_argument("decision_function: dimension mismatch");
  Eigen::VectorXd scores = x * weights;
  scores.array() += bias;
  return scores;
}

std::vector<int> TrainedModel::predict(const FeatureMatrix& x) const {
  if (is_linear()) {
    const Eigen::VectorXd scores = decision_function(x);
    std::vector<int> labels(static_cast<std::size_t>(scores.size()));
    for (Eigen::Index i = 0; i < scores.size(); ++i) labels[static_cast<std::size_t>(i)] = scores(i) > 0.0 ? 1 : 0;
    return labels;
  }
  if (!knn_x || !knn_y) throw std::logic_error("knn model has no training set");
  return knn_predict(*knn_x, *knn_y, select_columns(x, selected_features), k);
}

std::optional<std::vector<double>> TrainedModel::probabilities(const FeatureMatrix& x) const {
  if (is_linear()) {
    if (!calibration) return std::nullopt;
    const Eigen::VectorXd scores = decision_function(x);
    std::vector<double> p(static_cast<std::size_t>(scores.size()));
    for (Eigen::Index i = 0; i < scores.size(); ++i) p[static_cast<std::size_t>(i)] = calibration->probability(scores(i));
    return p;
  }
  if (!knn_x || !knn_y) throw std::logic_error("knn model has no training set");
  const auto neighbors = knn_neighbors(*knn_x, select_columns(x, selected_features), k);
  std::vector<double> p;
  p.reserve(neighbors.size());
  for (const auto& nb : neighbors) {
    double ones = 0.0;
    for (std::size_t idx : nb) ones += (*knn_y)[idx];
    p.push_back(ones / static_cast<double>(k));
  }
  return p;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> balanced_sample(std::span<const int> labels, std::size_t n_train, std::uint64_t seed) {
  if (n_train == 0 || n_train % 2 != 0) {
    throw std::invalid_argument(fmt::format("n_train must be a positive even number, got {}", n_train));
  }
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);

  const std::size_t per_class = n_train / 2;
  for (const auto& rows : by_class) {
    if (rows.size() < per_class) {
      throw std::invalid_argument(
          fmt::format("minority class has {} rows, {} needed per class", rows.size(), per_class));
    }
  }
  Rng rng(derive_seed(seed, 0x5A));
  std::vector<std::size_t> chosen;
  chosen.reserve(n_train);
  for (auto& rows : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    chosen.insert(chosen.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(per_class));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

LabeledDataset balanced_sample(const LabeledDataset& pool, std::size_t n_train, std::uint64_t seed) {
  const auto rows = balanced_sample(pool.y, n_train, seed);
  return pool.subset(rows);
}

// ---------------------------------------------------------------------------

double linear_loss(ModelKind kind, const FeatureMatrix& x, std::span<const int> y, const Eigen::VectorXd& w,
                   double b) {
  Eigen::VectorXd theta(w.size() + 1);
  theta << w, b;
  return SmoothObjective(kind, x, y, Penalty::l1, 0.0).value(theta);
}

ObjectiveValue linear_objective(ModelKind kind, const FeatureMatrix& x, std::span<const int> y,
                                const Eigen::VectorXd& w, double b, Penalty penalty, double c) {
  const double lambda = 1.0 / c;
  Eigen::VectorXd theta(w.size() + 1);
  theta << w, b;
  Eigen::VectorXd grad;
  ObjectiveValue out;
  out.value = SmoothObjective(kind, x, y, penalty, lambda).value_and_gradient(theta, grad);
  if (penalty == Penalty::l1) out.value += lambda * w.lpNorm<1>();
  out.grad_w = grad.head(w.size());
  out.grad_b = grad(w.size());
  return out;
}

TrainedModel train_linear(ModelKind kind, const LabeledDataset& train, const TrainOptions& options,
                          TrainDiagnostics* diagnostics) {
  if (kind == ModelKind::knn) throw std::invalid_argument("train_linear: knn is not a linear model");
  train.validate();
  if (train.size() == 0) throw std::invalid_argument("empty training set");
  require_both_classes(train.y);
  if (!(options.c > 0.0)) throw std::invalid_argument("C must be positive");

  const double lambda = 1.0 / options.c;
  const SmoothObjective objective(kind, train.x, train.y, options.penalty, lambda);
  const Eigen::Index d = objective.dim();

  double step_l = objective.curvature() * objective.gram_norm_estimate() +
                  (options.penalty == Penalty::l2 ? lambda : 0.0);
  if (!(step_l > 0.0)) step_l = 1.0;

  auto prox = [&](const Eigen::VectorXd& v, double l) {
    return options.penalty == Penalty::l1 ? soft_threshold(v, lambda / l, d) : v;
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd extrapolated = theta;
  Eigen::VectorXd grad;
  double f_extrapolated = objective.value_and_gradient(extrapolated, grad);
  double momentum_t = 1.0;

  TrainDiagnostics diag;
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    Eigen::VectorXd candidate;
    Eigen::VectorXd diff;
    while (true) {
      candidate = prox(extrapolated - grad / step_l, step_l);
      diff = candidate - extrapolated;
      const double f_candidate = objective.value(candidate);
      const double bound = f_extrapolated + grad.dot(diff) + 0.5 * step_l * diff.squaredNorm();
      if (f_candidate <= bound + 1e-14 * (1.0 + std::abs(f_extrapolated))) break;
      step_l *= 2.0;
    }
    diag.iterations = iter;
    diag.gradient_map_norm = step_l * diff.norm();

    const Eigen::VectorXd previous = theta;
    theta = candidate;
    if (diag.gradient_map_norm < options.tol) {
      diag.converged = true;
      break;
    }
    // Gradient-based adaptive restart.
    if ((extrapolated - theta).dot(theta - previous) > 0.0) momentum_t = 1.0;
    const double next_t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum_t * momentum_t));
    extrapolated = theta + ((momentum_t - 1.0) / next_t) * (theta - previous);
    momentum_t = next_t;
    f_extrapolated = objective.value_and_gradient(extrapolated, grad);
  }

  TrainedModel model;
  model.kind = kind;
  model.penalty = options.penalty;
  model.c = options.c;
  model.weights = theta.head(d);
  model.bias = theta(d);
  diag.objective = objective.value(theta) + (options.penalty == Penalty::l1 ? lambda * model.weights.lpNorm<1>() : 0.0);
  if (diagnostics != nullptr) *diagnostics = diag;
  return model;
}

TrainedModel train_logreg(const LabeledDataset& train, const TrainOptions& options, std::uint64_t /*seed*/,
                          TrainDiagnostics* diagnostics) {
  return train_linear(ModelKind::logreg, train, options, diagnostics);
}

TrainedModel train_linear_svm(const LabeledDataset& train, const TrainOptions& options, std::uint64_t /*seed*/,
                              TrainDiagnostics* diagnostics) {
  return train_linear(ModelKind::linear_svm, train, options, diagnostics);
}

std::vector<std::size_t> select_features(const TrainedModel& model, double threshold) {
  if (!model.is_linear()) throw std::invalid_argument("not a linear model");
  std::vector<std::size_t> out;
  for (Eigen::Index j = 0; j < model.weights.size(); ++j) {
    if (std::abs(model.weights(j)) >= threshold) out.push_back(static_cast<std::size_t>(j));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> knn_neighbors(const FeatureMatrix& train_x, const FeatureMatrix& query,
                                                    std::size_t k, std::size_t jobs) {
  const auto n = static_cast<std::size_t>(train_x.rows());
  if (n == 0) throw std::invalid_argument("knn: empty training set");
  if (k == 0 || k > n) throw std::invalid_argument(fmt::format("knn: k = {} outside [1, {}]", k, n));
  if (query.cols() != train_x.cols()) throw std::invalid_argument("knn: dimension mismatch");

  std::vector<std::vector<std::size_t>> result(static_cast<std::size_t>(query.rows()));
  const Eigen::Index d = train_x.cols();
  parallel_for(result.size(), jobs, [&](std::size_t q) {
    std::vector<std::pair<double, std::size_t>> dist(n);
    const double* qrow = query.row(static_cast<Eigen::Index>(q)).data();
    for (std::size_t i = 0; i < n; ++i) {
      const double* trow = train_x.row(static_cast<Eigen::Index>(i)).data();
      double s = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = qrow[j] - trow[j];
        s += diff * diff;
      }
      dist[i] = {s, i};
    }
    const auto kth = dist.begin() + static_cast<std::ptrdiff_t>(k);
    std::nth_element(dist.begin(), kth - 1, dist.end());
    std::sort(dist.begin(), kth);
    auto& out = result[q];
    out.reserve(k);
    for (auto it = dist.begin(); it != kth; ++it) out.push_back(it->second);
  });
  return result;
}

int knn_vote(std::span<const std::size_t> neighbors, std::span<const int> train_y, std::size_t k) {
  std::size_t ones = 0;
  for (std::size_t i = 0; i < k; ++i) ones += static_cast<std::size_t>(train_y[neighbors[i]] == 1);
  return 2 * ones > k ? 1 : 0;
}

std::vector<int> knn_predict(const FeatureMatrix& train_x, std::span<const int> train_y, const FeatureMatrix& query,
                             std::size_t k, std::size_t jobs) {
  if (static_cast<std::size_t>(train_x.rows()) != train_y.size()) {
    throw std::invalid_argument("knn: label count does not match training rows");
  }
  const auto neighbors = knn_neighbors(train_x, query, k, jobs);
  std::vector<int> out;
  out.reserve(neighbors.size());
  for (const auto& nb : neighbors) out.push_back(knn_vote(nb, train_y, k));
  return out;
}

TrainedModel make_knn_model(const LabeledDataset& train, std::size_t k) {
  train.validate();
  if (train.size() == 0) throw std::invalid_argument("knn: empty training set");
  if (k == 0 || k > train.size()) throw std::invalid_argument("knn: k outside [1, train size]");
  TrainedModel model;
  model.kind = ModelKind::knn;
  model.k = k;
  model.knn_x = std::make_shared<const FeatureMatrix>(train.x);
  model.knn_y = std::make_shared<const std::vector<int>>(train.y);
  return model;
}

// ---------------------------------------------------------------------------

std::vector<double> default_c_grid() { return {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0}; }
std::vector<double> default_k_grid() { return {1, 3, 5, 11, 21, 51}; }

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t n_folds, std::uint64_t seed) {
  if (n_folds == 0) throw std::invalid_argument("n_folds must be positive");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
  Rng rng(derive_seed(seed, 0xF0));
  std::vector<std::size_t> folds(labels.size(), 0);
  std::size_t position = 0;
  for (auto& rows : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t row : rows) folds[row] = position++ % n_folds;
  }
  return folds;
}

CvResult cross_validate(const LabeledDataset& train, ModelKind kind, Penalty penalty, std::span<const double> grid,
                        std::uint64_t seed, std::size_t jobs) {
  if (grid.empty()) throw std::invalid_argument("cross_validate: empty hyperparameter grid");
  train.validate();
  if (train.size() < 10) throw std::invalid_argument("cross_validate: needs at least 10 rows");

  const auto folds = stratified_folds(train.y, kFolds, seed);
  std::array<LabeledDataset, kFolds> fit_sets, val_sets;
  for (std::size_t f = 0; f < kFolds; ++f) {
    std::vector<std::size_t> fit_rows, val_rows;
    for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == f ? val_rows : fit_rows).push_back(i);
    fit_sets[f] = train.subset(fit_rows);
    val_sets[f] = train.subset(val_rows);
  }

  const std::size_t cells = grid.size();
  std::vector<double> correct(cells * kFolds, std::numeric_limits<double>::quiet_NaN());

  if (kind == ModelKind::knn) {
    for (std::size_t f = 0; f < kFolds; ++f) {
      const std::size_t n_fit = fit_sets[f].size();
      std::size_t k_max = 0;
      for (double k : grid) {
        const auto kk = static_cast<std::size_t>(k);
        if (kk >= 1 && kk <= n_fit) k_max = std::max(k_max, kk);
      }
      if (k_max == 0) continue;
      const auto neighbors = knn_neighbors(fit_sets[f].x, val_sets[f].x, k_max, jobs);
      for (std::size_t c = 0; c < cells; ++c) {
        const auto kk = static_cast<std::size_t>(grid[c]);
        if (kk < 1 || kk > k_max) continue;
        double hits = 0.0;
        for (std::size_t q = 0; q < neighbors.size(); ++q) {
          hits += knn_vote(neighbors[q], fit_sets[f].y, kk) == val_sets[f].y[q] ? 1.0 : 0.0;
        }
        correct[c * kFolds + f] = hits / static_cast<double>(neighbors.size());
      }
    }
  } else {
    parallel_for(cells * kFolds, jobs, [&](std::size_t job) {
      const std::size_t c = job / kFolds;
      const std::size_t f = job % kFolds;
      const TrainedModel m = train_linear(kind, fit_sets[f], TrainOptions{penalty, grid[c]});
      const auto predicted = m.predict(val_sets[f].x);
      double hits = 0.0;
      for (std::size_t q = 0; q < predicted.size(); ++q) hits += predicted[q] == val_sets[f].y[q] ? 1.0 : 0.0;
      correct[job] = hits / static_cast<double>(predicted.size());
    });
  }

  CvResult result;
  result.mean_accuracy.assign(cells, std::numeric_limits<double>::quiet_NaN());
  double best = -1.0;
  for (std::size_t c = 0; c < cells; ++c) {
    double sum = 0.0;
    bool feasible = true;
    for (std::size_t f = 0; f < kFolds; ++f) {
      const double v = correct[c * kFolds + f];
      if (std::isnan(v)) feasible = false;
      sum += v;
    }
    if (!feasible) continue;
    result.mean_accuracy[c] = sum / static_cast<double>(kFolds);
    if (result.mean_accuracy[c] > best) {
      best = result.mean_accuracy[c];
      result.best_index = c;
    }
  }
  if (best < 0.0) throw std::invalid_argument("cross_validate: no feasible grid cell");
  result.best_value = grid[result.best_index];
  result.model = kind == ModelKind::knn
                     ? make_knn_model(train, static_cast<std::size_t>(result.best_value))
                     : train_linear(kind, train, TrainOptions{penalty, result.best_value});
  return result;
}

// ---------------------------------------------------------------------------

EnsembleMember fit_member(const LabeledDataset& pool, const PipelineConfig& config, std::uint64_t seed) {
  EnsembleMember member;
  member.seed = seed;

  LabeledDataset sample = config.n_train > 0 ? balanced_sample(pool, config.n_train, derive_seed(seed, 1)) : pool;
  member.train_row_ids = sample.row_ids;
  const auto full_dim = sample.x.cols();

  std::vector<std::size_t> selected;
  if (config.selection != FeatureSelection::none) {
    const ModelKind selector =
        config.selection == FeatureSelection::lr_l1 ? ModelKind::logreg : ModelKind::linear_svm;
    const auto c_grid = default_c_grid();
    const CvResult selection =
        cross_validate(sample, selector, Penalty::l1, c_grid, derive_seed(seed, 2), config.jobs);
    selected = select_features(selection.model, config.select_threshold);
    // An all-zero selector leaves nothing to train on; an empty list keeps every feature.
  }

  LabeledDataset reduced = sample;
  if (!selected.empty()) reduced.x = select_columns(sample.x, selected);

  std::vector<double> grid = config.grid;
  if (grid.empty()) grid = config.model == ModelKind::knn ? default_k_grid() : default_c_grid();
  CvResult cv = cross_validate(reduced, config.model, config.penalty, grid, derive_seed(seed, 3), config.jobs);
  member.cv_accuracy = cv.mean_accuracy;
  member.best_value = cv.best_value;

  TrainedModel model = std::move(cv.model);
  model.selected_features = selected;
  if (model.is_linear()) {
    if (!selected.empty()) {
      Eigen::VectorXd full = Eigen::VectorXd::Zero(full_dim);
      for (std::size_t j = 0; j < selected.size(); ++j) {
        full(static_cast<Eigen::Index>(selected[j])) = model.weights(static_cast<Eigen::Index>(j));
      }
      model.weights = std::move(full);
    }
    if (config.calibrate) {
      const Eigen::VectorXd scores = model.decision_function(sample.x);
      model.calibration = platt_fit(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                                    sample.y);
    }
  }
  member.model = std::move(model);
  return member;
}

std::vector<int> mode_vote(std::span<const std::vector<int>> votes) {
  if (votes.empty() || votes.size() % 2 == 0) throw std::invalid_argument("mode may tie: use an odd number of seeds");
  const std::size_t rows = votes.front().size();
  std::vector<int> out(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t ones = 0;
    for (const auto& v : votes) {
      if (v.size() != rows) throw std::invalid_argument("mode_vote: vote lists differ in length");
      ones += static_cast<std::size_t>(v[r] == 1);
    }
    out[r] = 2 * ones > votes.size() ? 1 : 0;
  }
  return out;
}

EnsemblePrediction predict_ensemble(std::span<const EnsembleMember> members, const FeatureMatrix& x) {
  std::vector<std::vector<int>> votes;
  std::vector<double> prob_sum(static_cast<std::size_t>(x.rows()), 0.0);
  bool have_probabilities = true;
  for (const EnsembleMember& m : members) {
    votes.push_back(m.model.predict(x));
    const auto p = m.model.probabilities(x);
    if (!p) {
      have_probabilities = false;
      continue;
    }
    for (std::size_t i = 0; i < p->size(); ++i) prob_sum[i] += (*p)[i];
  }
  EnsemblePrediction out;
  out.labels = mode_vote(votes);
  if (have_probabilities) {
    for (double& p : prob_sum) p /= static_cast<double>(members.size());
    out.probabilities = std::move(prob_sum);
  }
  return out;
}

EnsembleResult seed_ensemble(const LabeledDataset& pool, const FeatureMatrix& test_x, const PipelineConfig& config) {
  if (config.seeds.empty() || config.seeds.size() % 2 == 0) {
    throw std::invalid_argument("mode may tie: use an odd number of seeds");
  }
  EnsembleResult result;
  for (std::uint64_t seed : config.seeds) result.members.push_back(fit_member(pool, config, seed));
  result.prediction = predict_ensemble(result.members, test_x);
  return result;
}

}  // namespace cdrlink
