#pragma once

// Seeded synthetic CDR data with planted relationship archetypes, plus a
// feature-level generator with a known factor structure.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cdrlink/featurize.hpp"
#include "cdrlink/ingest.hpp"
#include "cdrlink/pairgraph.hpp"

namespace cdrlink {

using SegmentRates = std::array<double, kSegmentCount>;  // expected events per week, by TimeSegment::index()

enum class GenderRule : std::uint8_t { opposite, same, any };

struct ArchetypeConfig {
  std::string code;  // relationship code, e.g. "-Y peers", "M child"
  double prevalence = 0.0;
  SegmentRates call_rate{};
  SegmentRates text_rate{};
  double duration_log_mean = 4.5;  // log seconds
  double duration_log_std = 1.0;
  double direction_skew = 0.5;  // fraction of events started by the younger user
  int younger_age_min = 18;
  int younger_age_max = 28;
  int gap_min = 0;
  int gap_max = 19;
  GenderRule gender = GenderRule::any;
};

struct BackgroundConfig {
  std::size_t side_links_per_user = 2;
  double rate_multiplier = 0.1;            // side-link rates relative to the user's planted pair
  double shared_fraction = 0.3;            // chance a side contact of the older user is shared with the younger
  double unknown_duration_fraction = 1.0;  // of calls placed by non-subscribers
};

struct GeneratorConfig {
  std::string preset = "table3-like";
  std::size_t n_pairs = 1000;
  ObservationWindow window = ObservationWindow::default_window();
  std::int64_t utc_offset = 0;  // seconds east of UTC used to place dayparts
  std::uint64_t seed = 1;
  double heterogeneity = 0.5;  // log-std of per-pair rate multipliers; 0 disables
  std::vector<ArchetypeConfig> archetypes;
  BackgroundConfig background;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

/// Archetypes of the table3-like preset.
std::vector<ArchetypeConfig> table3_like_archetypes();
GeneratorConfig preset_config(std::string_view preset);

/// Flat `key = value` text; `#` starts a comment. Keys: preset, n_pairs, seed,
/// window_start, window_end, utc_offset, heterogeneity, side_links,
/// side_multiplier, shared_fraction, unknown_duration_fraction, and per
/// archetype `archetype.<code with '_' for spaces>.<field>` where field is
/// prevalence, call_rate, text_rate (six comma-separated values),
/// duration_log_mean, duration_log_std or direction_skew.
GeneratorConfig parse_generator_config(std::istream& in);
GeneratorConfig parse_generator_config_text(std::string_view text);
std::string generator_config_text(const GeneratorConfig& config);

struct TruthRow {
  PairKey key;
  std::string archetype_code;
  int age_first = 0;
  Gender gender_first = Gender::female;
  int age_second = 0;
  Gender gender_second = Gender::female;

  bool operator==(const TruthRow&) const = default;
};

inline constexpr const char* kTruthHeader = "first,second,archetype_code,age_first,gender_first,age_second,gender_second";

struct SyntheticDataset {
  SubscriberTable subscribers;
  std::vector<CdrEvent> events;  // sorted
  std::vector<TruthRow> truth;   // sorted by key
};

/// Archetype counts by largest remainder; throws when a positive-prevalence
/// archetype would receive no pair ("infeasible prevalence rounding").
std::vector<std::size_t> archetype_counts(const std::vector<ArchetypeConfig>& archetypes, std::size_t n_pairs);

SyntheticDataset generate(const GeneratorConfig& config);

void write_truth(std::ostream& out, std::span<const TruthRow> truth);
std::vector<TruthRow> read_truth(std::istream& in);

struct PlantedRecovery {
  std::size_t n_planted = 0;
  std::size_t n_recovered = 0;
  double fraction = 0.0;
  bool passed = false;  // fraction >= 0.99
  std::vector<PairKey> missing;
};

/// Runs link extraction, the regularity filter and mutual top-rank selection,
/// then measures how many planted pairs survive.
PlantedRecovery verify_planted(std::span<const CdrEvent> events, std::span<const TruthRow> truth,
                               const ObservationWindow& window, std::size_t min_months = 5);

// ---------------------------------------------------------------------------
// planted-factors preset

inline constexpr std::size_t kPlantedFactorCount = 5;

struct PlantedFactorConfig {
  std::size_t n_rows = 5000;
  std::uint64_t seed = 1;
  double loading_min = 0.55;
  double loading_max = 0.9;
};

struct PlantedFactorData {
  FeatureTable table;
  /// Planted factor per feature (0..4), or -1 for unplanted features.
  std::vector<int> membership;
  Eigen::MatrixXd loadings;  // 175 x 5 generating loadings
};

/// Planted factor of a feature by name: daytime calls, evening calls,
/// late-night calls, texts, inter-event times; -1 otherwise.
int planted_factor_of(std::string_view feature_name);
std::vector<std::string> planted_factor_names();

PlantedFactorData generate_planted_factors(const PlantedFactorConfig& config);

/// Fraction of planted memberships recovered by `assigned` (feature -> rotated factor
/// or -1), after matching each rotated factor to the planted factor it overlaps most.
double planted_recovery(std::span<const int> membership, std::span<const int> assigned);

void write_membership(std::ostream& out, std::span<const int> membership);

}  // namespace cdrlink
