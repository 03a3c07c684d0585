#pragma once

#include <span>

namespace cdrlink {

/// p(y = 1 | f) = 1 / (1 + exp(a * f + b))
struct PlattParams {
  double a = 0.0;
  double b = 0.0;

  double probability(double decision) const;
};

struct PlattOptions {
  double tol = 1e-10;
  int max_iter = 200;
};

/// Maximum-likelihood sigmoid fit against smoothed targets
/// (N+ + 1)/(N+ + 2) and 1/(N- + 2), damped Newton with backtracking.
/// Throws std::invalid_argument unless both classes are present.
PlattParams platt_fit(std::span<const double> decision, std::span<const int> labels,
                      const PlattOptions& options = {});

}  // namespace cdrlink
