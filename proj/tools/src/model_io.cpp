#include "model_io.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace cdrlink::cli {

using Json = nlohmann::ordered_json;

namespace {

Json member_to_json(const EnsembleMember& m) {
  const TrainedModel& model = m.model;
  Json j;
  j["seed"] = m.seed;
  j["kind"] = to_string(model.kind);
  j["best_value"] = m.best_value;
  j["cv_accuracy"] = Json::array();
  for (double v : m.cv_accuracy) j["cv_accuracy"].push_back(std::isnan(v) ? Json(nullptr) : Json(v));
  j["selected_features"] = model.selected_features;
  if (model.is_linear()) {
    j["penalty"] = to_string(model.penalty);
    j["C"] = model.c;
    j["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
    j["bias"] = model.bias;
    if (model.calibration) j["calibration"] = {{"A", model.calibration->a}, {"B", model.calibration->b}};
  } else {
    j["k"] = model.k;
  }
  j["train_row_ids"] = m.train_row_ids;
  return j;
}

EnsembleMember member_from_json(const nlohmann::json& j) {
  EnsembleMember m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.best_value = j.at("best_value").get<double>();
  for (const auto& v : j.at("cv_accuracy")) {
    m.cv_accuracy.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
  }
  m.train_row_ids = j.at("train_row_ids").get<std::vector<std::string>>();
  TrainedModel& model = m.model;
  model.kind = parse_model_kind(j.at("kind").get<std::string>());
  model.selected_features = j.at("selected_features").get<std::vector<std::size_t>>();
  if (model.is_linear()) {
    model.penalty = j.at("penalty").get<std::string>() == "l1" ? Penalty::l1 : Penalty::l2;
    model.c = j.at("C").get<double>();
    const auto w = j.at("weights").get<std::vector<double>>();
    model.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    model.bias = j.at("bias").get<double>();
    if (j.contains("calibration")) {
      model.calibration = PlattParams{j["calibration"].at("A").get<double>(), j["calibration"].at("B").get<double>()};
    }
  } else {
    model.k = j.at("k").get<std::size_t>();
  }
  return m;
}

}  // namespace

std::string model_file_to_json(const ModelFile& file) {
  Json j;
  j["format"] = "cdrlink-model/1";
  j["task"] = to_string(file.task);
  j["model"] = to_string(file.config.model);
  j["penalty"] = to_string(file.config.penalty);
  j["feature_select"] = to_string(file.config.selection);
  j["n_train"] = file.config.n_train;
  j["n_test"] = file.n_test;
  j["split_seed"] = file.split_seed;
  j["seeds"] = file.config.seeds;
  j["manifest_hash"] = manifest_hash();
  j["scaler"] = Json::parse(scaler_to_json(file.scaler));
  j["test_row_ids"] = file.test_row_ids;
  j["members"] = Json::array();
  for (const auto& m : file.members) j["members"].push_back(member_to_json(m));
  return j.dump(1);
}

ModelFile model_file_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "cdrlink-model/1") throw std::invalid_argument("not a cdrlink model file");
  if (j.at("manifest_hash").get<std::string>() != manifest_hash()) {
    throw std::invalid_argument("model was trained against a different feature manifest");
  }
  ModelFile file;
  file.task = parse_task(j.at("task").get<std::string>());
  file.config.model = parse_model_kind(j.at("model").get<std::string>());
  file.config.penalty = j.at("penalty").get<std::string>() == "l1" ? Penalty::l1 : Penalty::l2;
  file.config.selection = parse_feature_selection(j.at("feature_select").get<std::string>());
  file.config.n_train = j.at("n_train").get<std::size_t>();
  file.config.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  file.n_test = j.at("n_test").get<std::size_t>();
  file.split_seed = j.at("split_seed").get<std::uint64_t>();
  file.scaler = scaler_from_json(j.at("scaler").dump());
  file.test_row_ids = j.at("test_row_ids").get<std::vector<std::string>>();
  for (const auto& m : j.at("members")) file.members.push_back(member_from_json(m));
  return file;
}

void attach_knn_training(ModelFile& file, const LabeledDataset& data) {
  std::map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < data.row_ids.size(); ++i) index.emplace(data.row_ids[i], i);
  for (auto& member : file.members) {
    if (member.model.is_linear()) continue;
    std::vector<std::size_t> rows;
    rows.reserve(member.train_row_ids.size());
    for (const auto& id : member.train_row_ids) {
      const auto it = index.find(id);
      if (it == index.end()) throw std::invalid_argument(fmt::format("training row '{}' missing from features", id));
      rows.push_back(it->second);
    }
    LabeledDataset train = data.subset(rows);
    if (!member.model.selected_features.empty()) {
      FeatureMatrix reduced(train.x.rows(), static_cast<Eigen::Index>(member.model.selected_features.size()));
      for (std::size_t c = 0; c < member.model.selected_features.size(); ++c) {
        reduced.col(static_cast<Eigen::Index>(c)) = train.x.col(static_cast<Eigen::Index>(member.model.selected_features[c]));
      }
      train.x = std::move(reduced);
    }
    const auto selected = member.model.selected_features;
    member.model = make_knn_model(train, member.model.k);
    member.model.selected_features = selected;
  }
}

}  // namespace cdrlink::cli
