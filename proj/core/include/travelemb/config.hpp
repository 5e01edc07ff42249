#pragma once

#include "travelemb/harness.hpp"
#include "travelemb/mnl.hpp"

#include <filesystem>
#include <string>

namespace travelemb {

/// Reads a TOML or JSON experiment config (chosen by extension). Relative
/// paths inside the file resolve against the file's directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(std::string_view text, bool toml, const std::filesystem::path& base_dir);

/// Canonical JSON. Output directory and thread count are left out, so the
/// text (and its hash) depends only on settings that change results.
std::string experiment_config_json(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);

/// Utility specification from TOML: [[term]] tables with label, train, sm,
/// car and description keys; [[encoded]] tables with variable, alternatives
/// and optional k.
struct UtilitySpecFile {
  UtilitySpec spec;
  std::vector<std::pair<std::string, int>> k_values;
};

UtilitySpecFile load_utility_spec(const std::filesystem::path& path);
UtilitySpecFile parse_utility_spec(std::string_view toml_text);

}  // namespace travelemb
