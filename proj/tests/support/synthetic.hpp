#pragma once

#include "travelemb/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace travelemb::testing {

struct SyntheticOptions {
  int respondents = 60;
  int rows_per_respondent = 9;
  std::uint64_t seed = 1;
  /// Cantons used for origins and destinations (codes 1..n).
  int cantons = 4;
  /// Adds rows that the Swissmetro filter must drop (CHOICE 0, AGE 6,
  /// PURPOSE 9, unavailable chosen alternative).
  bool include_invalid = false;
};

/// Comma-separated text with the Swissmetro raw schema. Choices follow a
/// logit with time, cost and origin-destination effects, so models fitted
/// on it have something to find.
std::string synthetic_swissmetro_csv(const SyntheticOptions& options = {});

/// The same data after parse_raw and filter_and_derive.
ChoiceDataset synthetic_dataset(const SyntheticOptions& options = {});

void write_synthetic_csv(const std::filesystem::path& path, const SyntheticOptions& options = {});

/// One categorical variable and nothing else: every row chooses train with
/// all alternatives available.
ChoiceDataset categorical_dataset(const std::string& variable, const std::vector<std::string>& labels,
                                  const std::vector<int>& codes);

/// A fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace travelemb::testing
