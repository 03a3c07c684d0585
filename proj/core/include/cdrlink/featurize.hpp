#pragma once

// Per-pair feature extraction: time segmentation, weekly series,
// distribution statistics, fractions, active days, reciprocity,
// inter-event statistics, and the standardising scaler.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cdrlink/ingest.hpp"
#include "cdrlink/pairgraph.hpp"

namespace cdrlink {

enum class WeekPart : std::uint8_t { weekday, weekend };   // Mon-Thu, Fri-Sun
enum class DayPart : std::uint8_t { daytime, evening, late_night };  // 07-16, 17-22, 23-06
enum class Quantity : std::uint8_t { calls, duration, texts };

inline constexpr std::size_t kSegmentCount = 6;
inline constexpr std::size_t kFeatureCount = 175;

struct TimeSegment {
  WeekPart weekpart = WeekPart::weekday;
  DayPart daypart = DayPart::daytime;

  /// weekpart * 3 + daypart
  std::size_t index() const { return static_cast<std::size_t>(weekpart) * 3 + static_cast<std::size_t>(daypart); }
  static TimeSegment from_index(std::size_t index);
  bool operator==(const TimeSegment&) const = default;
};

/// Segment of a UTC timestamp under a fixed local offset (seconds east of UTC).
TimeSegment segment_of(std::int64_t timestamp, std::int64_t utc_offset = 0);

/// One event of a pair, oriented against the pair's canonical order.
struct PairEvent {
  std::int64_t timestamp = 0;
  EventKind kind = EventKind::call;
  std::optional<std::int64_t> duration;
  bool from_first = true;

  bool operator==(const PairEvent&) const = default;
};

/// Buckets the events of the requested pairs; pairs without events map to empty lists.
std::map<PairKey, std::vector<PairEvent>> group_pair_events(std::span<const CdrEvent> events,
                                                            std::span<const PairKey> pairs);

struct SegmentCell {
  double n_calls = 0.0;
  double duration = 0.0;
  double n_texts = 0.0;

  double get(Quantity q) const;
  bool operator==(const SegmentCell&) const = default;
};

/// Per Monday-aligned local week fully inside the window, per segment.
struct WeeklySeries {
  std::vector<std::int64_t> week_starts;  // UTC instant of each local Monday 00:00
  std::vector<std::array<SegmentCell, kSegmentCount>> weeks;

  std::size_t week_count() const { return weeks.size(); }
  std::vector<double> series(Quantity q, std::size_t segment) const;
};

/// Throws std::invalid_argument when the window holds no full week.
WeeklySeries weekly_series(std::span<const PairEvent> events, const ObservationWindow& window,
                           std::int64_t utc_offset = 0);

/// Population moments; excess kurtosis; skew and kurtosis are 0 for a constant series.
struct DistStats {
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;

  std::array<double, 7> as_array() const { return {mean, median, std, min, max, skewness, kurtosis}; }
};

/// Throws std::invalid_argument on an empty series.
DistStats dist_stats(std::span<const double> values);

/// Whole-window totals per segment.
using SegmentTotals = std::array<SegmentCell, kSegmentCount>;
SegmentTotals segment_totals(std::span<const PairEvent> events, std::int64_t utc_offset = 0);

/// Order: weekpart, quantity, daypart. Late-night call and duration
/// fractions are stored as log1p.
std::array<double, 18> fraction_features(const SegmentTotals& totals);

/// Distinct local days with a call (first six) or text (last six) per
/// segment, each stored as log1p.
std::array<double, 12> active_days_features(std::span<const PairEvent> events, std::int64_t utc_offset = 0);

/// |in - out| / (in + out), 0 when both are 0. Throws on negative input.
double reciprocity(double in_qty, double out_qty);

/// Gap statistics of one channel: log1p on the scale statistics, signed
/// log1p on skewness and kurtosis. Fewer than two events yields
/// log1p(window_seconds) for the scale statistics and 0 for the shape ones.
std::array<double, 7> interevent_stats(std::vector<std::int64_t> timestamps, std::int64_t window_seconds);

double signed_log1p(double x);

struct FeatureConfig {
  std::int64_t utc_offset = 0;
};

using FeatureVector = std::array<double, kFeatureCount>;

FeatureVector assemble_feature_vector(std::span<const PairEvent> events, const CommonContacts& common,
                                      const ObservationWindow& window, const FeatureConfig& config = {});

/// Computes the common-contact features from `graph` for `pair`.
FeatureVector assemble_feature_vector(std::span<const PairEvent> events, const LinkGraph& graph,
                                      const PairKey& pair, const ObservationWindow& window,
                                      const FeatureConfig& config = {});

struct FeatureTable;

/// Feature rows for `pairs` in the given order; common contacts come from `graph`.
FeatureTable compute_features(std::span<const CdrEvent> events, std::span<const PairKey> pairs,
                              const LinkGraph& graph, const ObservationWindow& window,
                              const FeatureConfig& config = {}, std::size_t jobs = 1);

// ---------------------------------------------------------------------------
// Feature manifest

enum class FeatureGroup : std::uint8_t { weekly, fraction, active_days, reciprocity, interevent, common_contacts };
enum class Transform : std::uint8_t { none, log1p, signed_log1p };

struct FeatureSpec {
  std::string name;
  FeatureGroup group;
  Transform transform;
  std::string description;
};

/// The 175 features in vector order.
const std::vector<FeatureSpec>& feature_manifest();
std::vector<std::string> feature_names();
/// Per-group counts in FeatureGroup order.
std::array<std::size_t, 6> manifest_group_counts();
/// SHA-256 over the names and transforms; pins files to a manifest version.
const std::string& manifest_hash();
/// Markdown table documenting every feature.
std::string manifest_markdown();

const char* to_string(FeatureGroup group);
const char* to_string(Transform transform);

// ---------------------------------------------------------------------------
// Feature tables and standardisation

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureTable {
  std::vector<PairKey> keys;
  FeatureMatrix values;  // keys.size() x 175
};

void write_features(std::ostream& out, const FeatureTable& table);
/// Throws IngestError unless the header matches the manifest.
FeatureTable read_features(std::istream& in);

struct ScalerParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // population standard deviation
};

/// Throws std::invalid_argument naming the first constant column.
/// `names` (optional) labels columns in the error message.
ScalerParams fit_scaler(const FeatureMatrix& x, std::span<const std::string> names = {});
FeatureMatrix apply_scaler(const FeatureMatrix& x, const ScalerParams& params);

/// `{"mean": [...], "std": [...], "manifest_hash": "..."}`
std::string scaler_to_json(const ScalerParams& params);
ScalerParams scaler_from_json(const std::string& text);

}  // namespace cdrlink
