// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtlf/engine.hpp"
#include "mtlf/grid.hpp"

namespace mtlf::cli {

inline constexpr int kConfigSchemaVersion = 1;

/// One experiment document. Manifest paths resolve against the config
/// file's directory and are loaded eagerly, so a bad reference fails before
/// any training.
struct ExperimentConfig {
  std::string profile = "desk";
  nlohmann::json encoder_overrides = nlohmann::json::object();  // EncoderConfig fields
  TrainConfig train;
  std::size_t folds = 5;
  bool stratified = true;
  bool aux_per_fold = false;
  bool grid = false;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "mtlf_out";
  std::optional<std::filesystem::path> vocab_path;

  DatasetManifest target;
  std::vector<DatasetManifest> auxiliaries;  // in config order
};

ExperimentConfig parse_experiment_config(std::string_view json, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& file);  // ConfigError

nlohmann::ordered_json experiment_config_to_json(const ExperimentConfig& config,
                                                 const std::filesystem::path& relative_to = {});

/// flag > MTLF_SEED > config. ConfigError when the environment value is not an
/// unsigned integer.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const char* env_value, std::uint64_t config_seed);

/// Profile plus overrides, sized to the vocabulary.
EncoderConfig resolve_encoder(const ExperimentConfig& config, std::size_t vocab_size);

struct ExperimentData {
  Vocab vocab;
  EncoderConfig encoder;
  std::string target;
  std::vector<std::string> in_domain;     // auxiliary names in config order
  std::vector<std::string> cross_domain;
  std::map<std::string, GridDataset> datasets;
};

/// Reads every dataset (applying caps with seeded subsampling), builds or
/// loads the vocabulary, and encodes at the encoder's max_len.
ExperimentData load_experiment_data(const ExperimentConfig& config);

}  // namespace mtlf::cli
