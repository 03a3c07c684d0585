#include "cdrlink/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cdrlink/csv.hpp"

namespace cdrlink {

namespace {

std::string feature_label(std::span<const std::string> names, std::size_t index) {
  return index < names.size() ? names[index] : fmt::format("f{}", index);
}

}  // namespace

Eigen::MatrixXd covariance_matrix(const FeatureMatrix& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(x.rows());
}

PcaResult pca(const FeatureMatrix& standardized) {
  if (standardized.rows() < 2) throw std::invalid_argument("pca needs at least 2 rows");

  const Eigen::MatrixXd cov = covariance_matrix(standardized);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pca: eigendecomposition failed");

  const Eigen::Index d = cov.rows();
  PcaResult result;
  result.eigenvalues.resize(d);
  result.components.resize(d, d);
  // Eigen returns ascending eigenvalues.
  for (Eigen::Index j = 0; j < d; ++j) {
    const Eigen::Index src = d - 1 - j;
    result.eigenvalues(j) = std::max(0.0, solver.eigenvalues()(src));
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index largest = 0;
    v.cwiseAbs().maxCoeff(&largest);
    if (v(largest) < 0.0) v = -v;
    result.components.col(j) = v;
  }
  const double total = result.eigenvalues.sum();
  result.explained_variance_ratio =
      total > 0.0 ? Eigen::VectorXd(result.eigenvalues / total) : Eigen::VectorXd::Zero(d);
  return result;
}

std::vector<ScreeRow> scree_data(const PcaResult& result) {
  std::vector<ScreeRow> rows;
  double cumulative = 0.0;
  for (Eigen::Index j = 0; j < result.explained_variance_ratio.size(); ++j) {
    cumulative += result.explained_variance_ratio(j);
    rows.push_back({static_cast<std::size_t>(j) + 1, result.explained_variance_ratio(j), cumulative});
  }
  return rows;
}

LoadingMatrix loadings(const PcaResult& result, std::size_t n_comp) {
  if (n_comp == 0 || n_comp > static_cast<std::size_t>(result.components.cols())) {
    throw std::out_of_range(fmt::format("n_comp {} outside [1, {}]", n_comp, result.components.cols()));
  }
  const auto k = static_cast<Eigen::Index>(n_comp);
  return result.components.leftCols(k) * result.eigenvalues.head(k).cwiseSqrt().asDiagonal();
}

double varimax_criterion(const LoadingMatrix& z) {
  const double p = static_cast<double>(z.rows());
  const Eigen::ArrayXXd sq = z.array().square();
  const Eigen::ArrayXd col_sq = sq.colwise().sum().transpose();
  return sq.square().sum() - col_sq.square().sum() / p;
}

VarimaxResult varimax(const LoadingMatrix& input, const VarimaxOptions& options) {
  const Eigen::Index p = input.rows();
  const Eigen::Index k = input.cols();
  if (k < 2) throw std::invalid_argument("varimax needs at least 2 factors");

  Eigen::VectorXd scale = Eigen::VectorXd::Ones(p);
  if (options.kaiser) {
    scale = input.rowwise().norm();
    for (Eigen::Index i = 0; i < p; ++i) {
      if (scale(i) == 0.0) scale(i) = 1.0;  // all-zero row stays zero
    }
  }
  const Eigen::MatrixXd x = scale.cwiseInverse().asDiagonal() * input;

  VarimaxResult result;
  Eigen::MatrixXd rotation = Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd best_rotation = rotation;
  double best_criterion = varimax_criterion(x);
  double previous = 0.0;

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    const Eigen::MatrixXd z = x * rotation;
    const Eigen::RowVectorXd col_sq = z.array().square().colwise().sum();
    const Eigen::MatrixXd target =
        z.array().cube().matrix() - z * (col_sq / static_cast<double>(p)).asDiagonal();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(x.transpose() * target, Eigen::ComputeFullU | Eigen::ComputeFullV);
    rotation = svd.matrixU() * svd.matrixV().transpose();
    const double current = svd.singularValues().sum();

    const double criterion = varimax_criterion(x * rotation);
    result.criterion_history.push_back(criterion);
    result.iterations = iter;
    if (criterion >= best_criterion) {
      best_criterion = criterion;
      best_rotation = rotation;
    }
    if (iter > 1 && current < previous * (1.0 + options.tol)) {
      result.converged = true;
      break;
    }
    previous = current;
  }

  // Polish with Kaiser's closed-form planar rotations; exact for two factors.
  const double p_d = static_cast<double>(p);
  for (int sweep = 0; sweep < 100; ++sweep) {
    Eigen::MatrixXd z = x * best_rotation;
    double largest = 0.0;
    for (Eigen::Index a = 0; a + 1 < k; ++a) {
      for (Eigen::Index b = a + 1; b < k; ++b) {
        const Eigen::ArrayXd u = z.col(a).array().square() - z.col(b).array().square();
        const Eigen::ArrayXd v = 2.0 * z.col(a).array() * z.col(b).array();
        const double num = 2.0 * (u * v).sum() - 2.0 * u.sum() * v.sum() / p_d;
        const double den = (u.square() - v.square()).sum() - (u.sum() * u.sum() - v.sum() * v.sum()) / p_d;
        const double phi = 0.25 * std::atan2(num, den);
        if (std::abs(phi) < 1e-15) continue;
        Eigen::MatrixXd g = Eigen::MatrixXd::Identity(k, k);
        g(a, a) = std::cos(phi);
        g(b, b) = std::cos(phi);
        g(a, b) = -std::sin(phi);
        g(b, a) = std::sin(phi);
        const Eigen::MatrixXd candidate = best_rotation * g;
        const Eigen::MatrixXd zc = x * candidate;
        if (varimax_criterion(zc) < varimax_criterion(z)) continue;
        best_rotation = candidate;
        z = zc;
        largest = std::max(largest, std::abs(phi));
      }
    }
    if (largest == 0.0) break;
    result.criterion_history.push_back(varimax_criterion(z));
    if (largest < 1e-12) break;
  }

  // Canonical column order and signs.
  Eigen::MatrixXd rotated = input * best_rotation;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd ss = rotated.colwise().squaredNorm().transpose();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return ss(a) > ss(b); });
  Eigen::MatrixXd canonical(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd col = best_rotation.col(order[static_cast<std::size_t>(j)]);
    if ((input * col).sum() < 0.0) col = -col;
    canonical.col(j) = col;
  }
  result.rotation = canonical;
  result.rotated = input * canonical;
  return result;
}

FactorAssignment assign_factors(const LoadingMatrix& rotated, std::span<const std::string> names, double cutoff) {
  FactorAssignment out;
  out.factors.resize(static_cast<std::size_t>(rotated.cols()));
  for (Eigen::Index i = 0; i < rotated.rows(); ++i) {
    Eigen::Index factor = 0;
    const double value = rotated.row(i).cwiseAbs().maxCoeff(&factor);
    FactorMember member{static_cast<std::size_t>(i), feature_label(names, static_cast<std::size_t>(i)), value,
                        static_cast<std::size_t>(factor)};
    if (value >= cutoff) {
      out.factors[static_cast<std::size_t>(factor)].push_back(std::move(member));
    } else {
      out.unassigned.push_back(std::move(member));
    }
  }
  auto by_loading = [](const FactorMember& a, const FactorMember& b) {
    if (a.abs_loading != b.abs_loading) return a.abs_loading > b.abs_loading;
    return a.feature_index < b.feature_index;
  };
  for (auto& members : out.factors) std::sort(members.begin(), members.end(), by_loading);
  std::sort(out.unassigned.begin(), out.unassigned.end(), by_loading);
  return out;
}

void write_scree_csv(std::ostream& out, std::span<const ScreeRow> rows) {
  out << "component,ratio,cumulative\n";
  for (const ScreeRow& r : rows) {
    out << r.component << ',' << csv::format_double(r.ratio) << ',' << csv::format_double(r.cumulative) << '\n';
  }
}

void write_loadings_csv(std::ostream& out, const LoadingMatrix& loadings, std::span<const std::string> names) {
  out << "feature";
  for (Eigen::Index j = 0; j < loadings.cols(); ++j) out << ",factor" << j + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < loadings.rows(); ++i) {
    out << feature_label(names, static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < loadings.cols(); ++j) out << ',' << csv::format_double(loadings(i, j));
    out << '\n';
  }
}

std::string factors_to_json(const FactorAssignment& assignment, double cutoff) {
  auto member_json = [](const FactorMember& m) {
    return nlohmann::json{{"feature", m.feature}, {"index", m.feature_index}, {"abs_loading", m.abs_loading}};
  };
  nlohmann::json j;
  j["cutoff"] = cutoff;
  j["factors"] = nlohmann::json::array();
  for (std::size_t f = 0; f < assignment.factors.size(); ++f) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : assignment.factors[f]) members.push_back(member_json(m));
    j["factors"].push_back({{"factor", f + 1}, {"features", members}});
  }
  j["unassigned"] = nlohmann::json::array();
  for (const auto& m : assignment.unassigned) j["unassigned"].push_back(member_json(m));
  return j.dump(2);
}

}  // namespace cdrlink
