#pragma once

#include <string>

#include <json.hpp>

#include "evidentia/model.hpp"
#include "evidentia/training.hpp"

namespace evidentia {

// One experiment = one JSON document. Missing keys take the documented
// defaults; the fully materialized config is echoed into every output for
// provenance. Validation collects every problem before failing.
struct ExperimentConfig {
  Task task = Task::argus;
  std::string data_dir;            // resolved directory with train/val/test.csv
  std::string pretrained_vectors;  // optional vector file
  ModelConfig model;
  TrainConfig train;
  int runs = 16;
  uint64_t seed = 42;
  std::string out_dir = "out";
};

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// check_files verifies that data_dir/{train,val,test}.csv and the vector
// file exist. $EVIDENTIA_DATA acts as the dataset-root fallback for
// missing or relative paths.
ExperimentConfig experiment_from_json(const nlohmann::json& j, bool check_files = true);
ExperimentConfig load_experiment_config(const std::string& path, bool check_files = true);
nlohmann::ordered_json experiment_to_json(const ExperimentConfig& cfg);

}  // namespace evidentia
