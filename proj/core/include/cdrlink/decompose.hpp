#pragma once

// Principal components of a standardized feature matrix, factor loadings,
// varimax rotation and cutoff-based factor assignment.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cdrlink/featurize.hpp"

namespace cdrlink {

struct PcaResult {
  Eigen::VectorXd eigenvalues;               // descending, clamped at 0
  Eigen::MatrixXd components;                // one orthonormal component per column
  Eigen::VectorXd explained_variance_ratio;  // eigenvalues / their sum
};

/// Covariance with divisor n, so a matrix standardized by fit_scaler has a
/// covariance equal to its correlation matrix (trace = column count).
Eigen::MatrixXd covariance_matrix(const FeatureMatrix& x);

/// Symmetric eigendecomposition of the covariance. Each component's
/// largest-magnitude entry is made positive. Throws on fewer than 2 rows.
PcaResult pca(const FeatureMatrix& standardized);

struct ScreeRow {
  std::size_t component = 0;  // 1-based
  double ratio = 0.0;
  double cumulative = 0.0;
};

std::vector<ScreeRow> scree_data(const PcaResult& result);

/// Features x factors.
using LoadingMatrix = Eigen::MatrixXd;

/// Column j = component_j * sqrt(eigenvalue_j) for the first n_comp components.
/// Throws std::out_of_range when n_comp is 0 or exceeds the component count.
LoadingMatrix loadings(const PcaResult& result, std::size_t n_comp);

struct VarimaxOptions {
  double tol = 1e-6;
  int max_iter = 1000;
  bool kaiser = true;  // row-normalise before rotating, undo afterwards
};

struct VarimaxResult {
  LoadingMatrix rotated;   // = input * rotation
  Eigen::MatrixXd rotation;
  int iterations = 0;
  bool converged = false;
  /// Criterion (on the normalised rows when kaiser is set) after each iteration.
  std::vector<double> criterion_history;
};

/// Sum over columns of  sum_i z_ij^4 - (sum_i z_ij^2)^2 / p.
double varimax_criterion(const LoadingMatrix& z);

/// Orthogonal varimax rotation. Output columns are ordered by decreasing sum
/// of squared loadings and signed so each column sum is non-negative.
/// Throws std::invalid_argument for fewer than 2 factors.
VarimaxResult varimax(const LoadingMatrix& loadings, const VarimaxOptions& options = {});

struct FactorMember {
  std::size_t feature_index = 0;
  std::string feature;
  double abs_loading = 0.0;
  std::size_t factor = 0;  // factor of the largest |loading|
};

struct FactorAssignment {
  std::vector<std::vector<FactorMember>> factors;  // each sorted by |loading| desc
  std::vector<FactorMember> unassigned;            // below the cutoff everywhere
};

/// Assigns each feature to the factor of its largest |loading| when that
/// value reaches `cutoff`. `names` may be empty (indices are used instead).
FactorAssignment assign_factors(const LoadingMatrix& rotated, std::span<const std::string> names,
                                double cutoff = 0.4);

void write_scree_csv(std::ostream& out, std::span<const ScreeRow> rows);
void write_loadings_csv(std::ostream& out, const LoadingMatrix& loadings, std::span<const std::string> names);
std::string factors_to_json(const FactorAssignment& assignment, double cutoff);

}  // namespace cdrlink
