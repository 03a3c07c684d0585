#include <algorithm>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "cdrlink/random.hpp"
#include "cdrlink/synthgen.hpp"

namespace cdrlink {

namespace {

bool contains(std::string_view s, std::string_view part) { return s.find(part) != std::string_view::npos; }

}  // namespace

int planted_factor_of(std::string_view name) {
  const bool texts = contains(name, "texts");
  const bool calls = contains(name, "calls") || contains(name, "duration");
  if (name.rfind("iet_", 0) == 0) return 4;
  if (name.rfind("weekly_", 0) != 0 && name.rfind("frac_", 0) != 0 && name.rfind("days_", 0) != 0) return -1;
  if (texts) return 3;
  if (!calls) return -1;
  if (contains(name, "daytime")) return 0;
  if (contains(name, "evening")) return 1;
  if (contains(name, "latenight")) return 2;
  return -1;
}

std::vector<std::string> planted_factor_names() {
  return {"daytime calls", "evening calls", "late-night calls", "texts", "inter-event times"};
}

PlantedFactorData generate_planted_factors(const PlantedFactorConfig& config) {
  if (config.n_rows < 2) throw std::invalid_argument("planted factors need at least two rows");
  if (!(config.loading_min > 0.0 && config.loading_min <= config.loading_max && config.loading_max < 1.0)) {
    throw std::invalid_argument("loadings must satisfy 0 < min <= max < 1");
  }
  const auto names = feature_names();
  const auto d = static_cast<Eigen::Index>(names.size());
  PlantedFactorData out;
  out.membership.reserve(names.size());
  out.loadings = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(kPlantedFactorCount));

  Rng rng(derive_seed(config.seed, 0xFAC));
  std::uniform_real_distribution<double> loading(config.loading_min, config.loading_max);
  for (Eigen::Index j = 0; j < d; ++j) {
    const int f = planted_factor_of(names[static_cast<std::size_t>(j)]);
    out.membership.push_back(f);
    if (f >= 0) out.loadings(j, f) = loading(rng);
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(config.n_rows);
  FeatureMatrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::array<double, kPlantedFactorCount> z{};
    for (double& v : z) v = normal(rng);
    for (Eigen::Index j = 0; j < d; ++j) {
      const int f = out.membership[static_cast<std::size_t>(j)];
      const double l = f >= 0 ? out.loadings(j, f) : 0.0;
      x(i, j) = (f >= 0 ? l * z[static_cast<std::size_t>(f)] : 0.0) + std::sqrt(1.0 - l * l) * normal(rng);
    }
  }
  out.table.values = std::move(x);
  out.table.keys.reserve(config.n_rows);
  for (std::size_t i = 0; i < config.n_rows; ++i) {
    out.table.keys.push_back(PairKey::make(fmt::format("f{:06d}a", i), fmt::format("f{:06d}b", i)));
  }
  return out;
}

double planted_recovery(std::span<const int> membership, std::span<const int> assigned) {
  if (membership.size() != assigned.size()) throw std::invalid_argument("membership lengths differ");
  // overlap[rotated][planted]
  std::map<int, std::map<int, std::size_t>> overlap;
  std::size_t planted = 0;
  for (std::size_t j = 0; j < membership.size(); ++j) {
    if (membership[j] < 0) continue;
    ++planted;
    if (assigned[j] >= 0) ++overlap[assigned[j]][membership[j]];
  }
  if (planted == 0) return 1.0;
  std::map<int, int> match;
  for (const auto& [rotated, counts] : overlap) {
    const auto best = std::max_element(counts.begin(), counts.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
    match[rotated] = best->first;
  }
  std::size_t hits = 0;
  for (std::size_t j = 0; j < membership.size(); ++j) {
    if (membership[j] >= 0 && assigned[j] >= 0 && match[assigned[j]] == membership[j]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(planted);
}

void write_membership(std::ostream& out, std::span<const int> membership) {
  const auto names = feature_names();
  const auto labels = planted_factor_names();
  out << "feature,factor\n";
  for (std::size_t j = 0; j < membership.size(); ++j) {
    out << names.at(j) << ',' << (membership[j] >= 0 ? labels[static_cast<std::size_t>(membership[j])] : "") << '\n';
  }
}

}  // namespace cdrlink
