#pragma once

// `key = value` run configuration for the train command. Lines starting with
// # are comments. Unknown keys are rejected.

#include "hcmr/config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace hcmr::cli {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path train_data;                 // required
  std::optional<std::filesystem::path> val_data;    // else a held-out tail of train_data
  double val_fraction = 0.1;
  std::optional<std::filesystem::path> constraints;
  std::optional<std::filesystem::path> output_dir;
  // n_concepts / input_dim taken from the data unless given explicitly.
  bool n_concepts_set = false;
  bool input_dim_set = false;
};

// Relative paths are resolved against `base_dir`.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace hcmr::cli
