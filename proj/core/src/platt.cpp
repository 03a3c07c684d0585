#include "cdrlink/platt.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace cdrlink {

double PlattParams::probability(double decision) const {
  const double z = a * decision + b;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

namespace {

// Negative log-likelihood of smoothed targets under the sigmoid.
double platt_nll(std::span<const double> f, const std::vector<double>& t, double a, double b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double z = a * f[i] + b;
    if (z >= 0.0) {
      sum += t[i] * z + std::log1p(std::exp(-z));
    } else {
      sum += (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
  }
  return sum;
}

}  // namespace

PlattParams platt_fit(std::span<const double> decision, std::span<const int> labels, const PlattOptions& options) {
  if (decision.size() != labels.size()) throw std::invalid_argument("platt_fit: length mismatch");
  double n_pos = 0.0;
  double n_neg = 0.0;
  for (int y : labels) {
    if (y == 1) {
      n_pos += 1.0;
    } else if (y == 0) {
      n_neg += 1.0;
    } else {
      throw std::invalid_argument("platt_fit: labels must be 0 or 1");
    }
  }
  if (n_pos == 0.0 || n_neg == 0.0) throw std::invalid_argument("platt_fit: both classes are required");

  const double hi = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo = 1.0 / (n_neg + 2.0);
  std::vector<double> t(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) t[i] = labels[i] == 1 ? hi : lo;

  double a = 0.0;
  double b = std::log((n_neg + 1.0) / (n_pos + 1.0));
  double fval = platt_nll(decision, t, a, b);
  constexpr double sigma = 1e-12;

  for (int iter = 0; iter < options.max_iter; ++iter) {
    double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < decision.size(); ++i) {
      const double z = a * decision[i] + b;
      double p, q;  // p = 1 / (1 + exp(z)), q = 1 - p
      if (z >= 0.0) {
        const double e = std::exp(-z);
        p = e / (1.0 + e);
        q = 1.0 / (1.0 + e);
      } else {
        const double e = std::exp(z);
        p = 1.0 / (1.0 + e);
        q = e / (1.0 + e);
      }
      const double d2 = p * q;
      h11 += decision[i] * decision[i] * d2;
      h22 += d2;
      h21 += decision[i] * d2;
      const double d1 = t[i] - p;
      g1 += decision[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < options.tol && std::abs(g2) < options.tol) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;

    double step = 1.0;
    bool moved = false;
    while (step >= 1e-10) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = platt_nll(decision, t, na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    if (!moved) break;
    if (std::abs(step * da) < options.tol && std::abs(step * db) < options.tol) break;
  }
  return {a, b};
}

}  // namespace cdrlink
