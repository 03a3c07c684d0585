#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cdrlink {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  double accuracy() const;
  double precision() const;  // 0 when nothing is predicted positive
  double tpr() const;        // 0 when there are no positives
  double tnr() const;        // 0 when there are no negatives
};

Confusion confusion_of(std::span<const int> predictions, std::span<const int> labels);

struct GroupStats {
  std::string code;
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double share = 0.0;  // of all evaluated rows
};

inline constexpr std::size_t kHistogramBins = 20;

struct EvalReport {
  Confusion confusion;
  double accuracy = 0.0;
  double precision = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  std::vector<GroupStats> groups;  // sorted by code; rows with an empty code are ungrouped
  bool has_probabilities = false;
  /// Relative frequencies over 20 equal bins on [0,1], per group code.
  std::map<std::string, std::vector<double>> histograms;
};

/// Relative-frequency histogram with `bins` equal bins on [0,1]; p = 1 falls in the last bin.
/// Throws std::invalid_argument for values outside [0,1].
std::vector<double> probability_histogram(std::span<const double> probabilities, std::size_t bins = kHistogramBins);

/// `probabilities` and `groups` may be empty. Throws std::invalid_argument on length mismatch.
EvalReport evaluate(std::span<const int> predictions, std::span<const double> probabilities,
                    std::span<const int> labels, std::span<const std::string> groups);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

}  // namespace cdrlink
