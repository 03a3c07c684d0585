#pragma once

// Task datasets built from features.csv + pairs.csv, train/test splitting,
// and the peer-bracket restricted training experiment.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cdrlink/evaluate.hpp"
#include "cdrlink/featurize.hpp"
#include "cdrlink/learn.hpp"
#include "cdrlink/pairgraph.hpp"

namespace cdrlink {

enum class Task : std::uint8_t { ogp, age35 };

const char* to_string(Task task);
Task parse_task(std::string_view text);  // ogp | age35

inline constexpr int kAgeCutoff = 35;

/// ogp: 1 for opposite-gender peers, 0 for every other labelled pair.
/// age35: 1 when the younger user is under 35.
/// nullopt for unlabelled pairs.
std::optional<int> task_label(Task task, const PairRow& row);

/// Rows of `features` whose pair is labelled in `pairs`, in feature-table
/// order; groups carry the relationship code. Features are left raw.
LabeledDataset build_dataset(const FeatureTable& features, std::span<const PairRow> pairs, Task task);

struct TestSplit {
  std::vector<std::size_t> test;  // ascending
  std::vector<std::size_t> pool;  // ascending, disjoint from test
};

/// Uniform random test set of n_test rows. Throws unless 0 < n_test < n.
TestSplit split_test(std::size_t n, std::size_t n_test, std::uint64_t seed);

struct PreparedSplit {
  LabeledDataset pool;  // standardized
  LabeledDataset test;  // standardized with the pool's parameters
  ScalerParams scaler;
};

/// Scaler is fit on the non-test pool only.
PreparedSplit prepare_split(const LabeledDataset& raw, const TestSplit& split);

/// Restrict to rows whose group code is a peer code with the given younger-user bracket.
std::vector<std::size_t> peer_bracket_rows(const LabeledDataset& data, AgeBracket bracket);

struct SplitAccuracy {
  double ogp = 0.0;  // accuracy among opposite-gender peers (label 1)
  double sgp = 0.0;  // accuracy among same-gender peers (label 0)
  double all = 0.0;
  std::size_t n_ogp = 0;
  std::size_t n_sgp = 0;
};

SplitAccuracy split_accuracy(std::span<const int> predictions, std::span<const int> labels);

struct AgeRestrictedResult {
  AgeBracket bracket = AgeBracket::young;
  std::size_t n_train_restricted = 0;
  SplitAccuracy full;        // model trained on the whole pool
  SplitAccuracy restricted;  // model trained on the bracket's peers only
  EvalReport full_report;
  EvalReport restricted_report;
  std::vector<std::string> test_row_ids;
};

/// `pool` and `test` are standardized ogp-task datasets. The full-pool
/// ensemble is refit unless `full_members` is supplied. Throws
/// std::invalid_argument when the bracket has fewer than 50 pool pairs per class.
AgeRestrictedResult age_restricted_experiment(const LabeledDataset& pool, const LabeledDataset& test,
                                              AgeBracket bracket, const PipelineConfig& config,
                                              std::span<const EnsembleMember> full_members = {});

std::string age_restricted_to_json(const AgeRestrictedResult& result);

}  // namespace cdrlink
