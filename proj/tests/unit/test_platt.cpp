#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cdrlink/platt.hpp"

using namespace cdrlink;

namespace {

// Negative log-likelihood against the smoothed targets, in its textbook form.
double nll(std::span<const double> f, std::span<const int> y, double a, double b) {
  double np = 0, nn = 0;
  for (int v : y) (v ? np : nn) += 1;
  const double hi = (np + 1) / (np + 2), lo = 1 / (nn + 2);
  double s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double t = y[i] ? hi : lo;
    const double p = 1.0 / (1.0 + std::exp(a * f[i] + b));
    s -= t * std::log(p) + (1 - t) * std::log(1 - p);
  }
  return s;
}

}  // namespace

TEST(Platt, ProbabilityIsStableAndMonotone) {
  const PlattParams p{-2.0, 0.5};
  EXPECT_NEAR(p.probability(0.25), 0.5, 1e-15);
  EXPECT_EQ(p.probability(1e6), 1.0);
  EXPECT_EQ(p.probability(-1e6), 0.0);
  EXPECT_LT(p.probability(-1.0), p.probability(1.0));
  EXPECT_TRUE(std::isfinite(PlattParams{1e300, 0}.probability(1e10)));
}

TEST(Platt, MinimisesSmoothedLikelihood) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> f;
    std::vector<int> y;
    const double shift = 0.5 + trial * 0.1;
    for (int i = 0; i < 300; ++i) {
      const int label = (rng() % 3 == 0) ? 1 : 0;
      y.push_back(label);
      f.push_back(z(rng) + (label ? shift : -shift));
    }
    const auto p = platt_fit(f, y);
    EXPECT_LT(p.a, 0.0);
    const double best = nll(f, y, p.a, p.b);
    for (double da : {-1e-3, 1e-3})
      for (double db : {-1e-3, 1e-3}) EXPECT_GE(nll(f, y, p.a + da, p.b + db), best - 1e-12);
    // Stationarity: analytic gradient of the likelihood at the fit.
    double np = 0, nn = 0;
    for (int v : y) (v ? np : nn) += 1;
    double ga = 0, gb = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double t = y[i] ? (np + 1) / (np + 2) : 1 / (nn + 2);
      const double d = t - p.probability(f[i]);
      ga += d * f[i];
      gb += d;
    }
    EXPECT_LT(std::hypot(ga, gb), 1e-6);
  }
}

TEST(Platt, SeparableDataStaysFinite) {
  const std::vector<double> f{-3, -2, -1, 1, 2, 3};
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  const auto p = platt_fit(f, y);
  EXPECT_TRUE(std::isfinite(p.a));
  EXPECT_TRUE(std::isfinite(p.b));
  // Smoothed targets for 3/3 are 0.8 and 0.2, so the fit cannot saturate.
  EXPECT_LT(p.probability(3), 0.999);
  EXPECT_GT(p.probability(3), 0.5);
}

TEST(Platt, RequiresBothClasses) {
  const std::vector<double> f{1, 2};
  const std::vector<int> y{1, 1};
  EXPECT_THROW(platt_fit(f, y), std::invalid_argument);
  const std::vector<int> short_y{1};
  EXPECT_THROW(platt_fit(f, short_y), std::invalid_argument);
}
