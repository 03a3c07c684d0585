#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdrlink/experiment.hpp"
#include "cdrlink/learn.hpp"

namespace cdrlink::cli {

/// Everything `train` hands to `evaluate`.
struct ModelFile {
  Task task = Task::ogp;
  PipelineConfig config;
  std::size_t n_test = 0;
  std::uint64_t split_seed = 0;
  ScalerParams scaler;
  std::vector<std::string> test_row_ids;
  std::vector<EnsembleMember> members;
};

std::string model_file_to_json(const ModelFile& file);

/// kNN members come back without their training matrix; see attach_knn_training.
ModelFile model_file_from_json(const std::string& text);

/// Rebuilds kNN members' training sets from `data` (standardized, with row ids).
void attach_knn_training(ModelFile& file, const LabeledDataset& data);

}  // namespace cdrlink::cli
