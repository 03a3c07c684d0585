#include "cdrlink/experiment.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cdrlink/random.hpp"

namespace cdrlink {

const char* to_string(Task task) { return task == Task::ogp ? "ogp" : "age35"; }

Task parse_task(std::string_view text) {
  if (text == "ogp") return Task::ogp;
  if (text == "age35") return Task::age35;
  throw std::invalid_argument(fmt::format("unknown task '{}'", text));
}

std::optional<int> task_label(Task task, const PairRow& row) {
  if (!row.label_code) return std::nullopt;
  if (task == Task::age35) {
    if (!row.younger_age) return std::nullopt;
    return *row.younger_age < kAgeCutoff ? 1 : 0;
  }
  const auto parsed = parse_relationship_code(*row.label_code);
  if (!parsed) throw std::invalid_argument(fmt::format("bad relationship code '{}'", *row.label_code));
  return parsed->age_gap == AgeGapCategory::peer && parsed->gender_composition == GenderComposition::opposite ? 1
                                                                                                              : 0;
}

LabeledDataset build_dataset(const FeatureTable& features, std::span<const PairRow> pairs, Task task) {
  std::map<PairKey, const PairRow*> by_key;
  for (const PairRow& row : pairs) by_key.emplace(row.key, &row);

  std::vector<std::size_t> rows;
  LabeledDataset out;
  for (std::size_t i = 0; i < features.keys.size(); ++i) {
    const auto it = by_key.find(features.keys[i]);
    if (it == by_key.end()) continue;
    const auto label = task_label(task, *it->second);
    if (!label) continue;
    rows.push_back(i);
    out.y.push_back(*label);
    out.groups.push_back(*it->second->label_code);
    out.row_ids.push_back(features.keys[i].row_id());
  }
  out.x.resize(static_cast<Eigen::Index>(rows.size()), features.values.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.x.row(static_cast<Eigen::Index>(r)) = features.values.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

TestSplit split_test(std::size_t n, std::size_t n_test, std::uint64_t seed) {
  if (n_test == 0 || n_test >= n) {
    throw std::invalid_argument(fmt::format("n_test = {} must be in [1, {})", n_test, n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x7E57));
  std::shuffle(order.begin(), order.end(), rng);
  TestSplit split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.pool.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.pool.begin(), split.pool.end());
  return split;
}

PreparedSplit prepare_split(const LabeledDataset& raw, const TestSplit& split) {
  PreparedSplit out;
  out.pool = raw.subset(split.pool);
  out.test = raw.subset(split.test);
  const auto names = raw.x.cols() == static_cast<Eigen::Index>(kFeatureCount) ? feature_names()
                                                                                : std::vector<std::string>{};
  out.scaler = fit_scaler(out.pool.x, names);
  out.pool.x = apply_scaler(out.pool.x, out.scaler);
  out.test.x = apply_scaler(out.test.x, out.scaler);
  return out;
}

std::vector<std::size_t> peer_bracket_rows(const LabeledDataset& data, AgeBracket bracket) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.groups.size(); ++i) {
    const auto parsed = parse_relationship_code(data.groups[i]);
    if (parsed && parsed->age_gap == AgeGapCategory::peer && parsed->younger_bracket == bracket) rows.push_back(i);
  }
  return rows;
}

SplitAccuracy split_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  const Confusion c = confusion_of(predictions, labels);
  return {c.tpr(), c.tnr(), c.accuracy(), c.tp + c.fn, c.tn + c.fp};
}

AgeRestrictedResult age_restricted_experiment(const LabeledDataset& pool, const LabeledDataset& test,
                                              AgeBracket bracket, const PipelineConfig& config,
                                              std::span<const EnsembleMember> full_members) {
  const auto pool_rows = peer_bracket_rows(pool, bracket);
  const auto test_rows = peer_bracket_rows(test, bracket);
  const LabeledDataset restricted_pool = pool.subset(pool_rows);
  const LabeledDataset restricted_test = test.subset(test_rows);

  const auto counts = restricted_pool.class_counts();
  const std::size_t minority = std::min(counts[0], counts[1]);
  if (minority < 50) {
    throw std::invalid_argument(fmt::format("bracket {} has {} opposite-gender and {} same-gender peers; 50 per class required",
                                            bracket_letter(bracket), counts[1], counts[0]));
  }
  if (restricted_test.size() == 0) {
    throw std::invalid_argument(fmt::format("bracket {} has no test pairs", bracket_letter(bracket)));
  }

  AgeRestrictedResult result;
  result.bracket = bracket;
  result.test_row_ids = restricted_test.row_ids;

  std::vector<EnsembleMember> refit;
  if (full_members.empty()) {
    for (std::uint64_t seed : config.seeds) refit.push_back(fit_member(pool, config, seed));
    full_members = refit;
  }
  const EnsemblePrediction full = predict_ensemble(full_members, restricted_test.x);
  result.full = split_accuracy(full.labels, restricted_test.y);
  result.full_report = evaluate(full.labels, full.probabilities ? std::span<const double>(*full.probabilities)
                                                                : std::span<const double>{},
                                restricted_test.y, restricted_test.groups);

  PipelineConfig restricted_config = config;
  restricted_config.n_train = std::min(config.n_train, 2 * minority);
  result.n_train_restricted = restricted_config.n_train;
  const EnsembleResult restricted = seed_ensemble(restricted_pool, restricted_test.x, restricted_config);
  const auto& rp = restricted.prediction;
  result.restricted = split_accuracy(rp.labels, restricted_test.y);
  result.restricted_report =
      evaluate(rp.labels, rp.probabilities ? std::span<const double>(*rp.probabilities) : std::span<const double>{},
               restricted_test.y, restricted_test.groups);
  return result;
}

std::string age_restricted_to_json(const AgeRestrictedResult& result) {
  auto split_json = [](const SplitAccuracy& s) {
    return nlohmann::ordered_json{{"ogp", s.ogp}, {"sgp", s.sgp}, {"all", s.all}, {"n_ogp", s.n_ogp},
                                  {"n_sgp", s.n_sgp}};
  };
  nlohmann::ordered_json j;
  j["bracket"] = std::string(1, bracket_letter(result.bracket));
  j["n_test"] = result.test_row_ids.size();
  j["n_train_restricted"] = result.n_train_restricted;
  j["full"] = split_json(result.full);
  j["restricted"] = split_json(result.restricted);
  j["full_report"] = nlohmann::ordered_json::parse(report_to_json(result.full_report));
  j["restricted_report"] = nlohmann::ordered_json::parse(report_to_json(result.restricted_report));
  return j.dump(2);
}

}  // namespace cdrlink
