#pragma once

#include "travelemb/common.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace travelemb {

// ---------------------------------------------------------------------------
// Raw ingestion
// ---------------------------------------------------------------------------

/// A numeric table as read from disk: one header row, every cell a number.
struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t row_count() const { return rows.size(); }
  std::optional<std::size_t> find_column(std::string_view name) const;
  /// Throws Error when the column is absent.
  std::size_t column_index(std::string_view name) const;
};

/// Parse failure with its location. `line` is 1-based and counts the header.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::string column)
      : Error(what), line_(line), column_(std::move(column)) {}
  std::size_t line() const { return line_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t line_;
  std::string column_;
};

/// Tab- or comma-separated text with a header row. The separator is taken
/// from the header line (tab wins if present).
RawTable parse_raw(std::istream& in);
RawTable load_raw(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Categories
// ---------------------------------------------------------------------------

/// Bijection between category labels and [0, D), in lexicographic label order.
struct CategoryMap {
  std::string variable;
  std::vector<std::string> labels;
  /// Human-readable names parallel to `labels` (defaults to the labels).
  std::vector<std::string> display;

  /// Deduplicates and sorts `observed`; `namer` supplies display names.
  static CategoryMap from_observed(std::string variable, std::vector<std::string> observed,
                                   std::string (*namer)(std::string_view) = nullptr);

  std::size_t size() const { return labels.size(); }
  std::optional<int> find(std::string_view label) const;
  /// Throws Error for an unknown label.
  int index(std::string_view label) const;
  const std::string& display_name(int index) const;
};

// ---------------------------------------------------------------------------
// Choice data
// ---------------------------------------------------------------------------

struct DatasetColumns {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> features;  // one vector per feature
  std::vector<CategoryMap> category_maps;
  std::vector<std::vector<int>> category_codes;  // one vector per categorical variable
  std::vector<int> choice;                        // alternative index
  std::vector<Availability> availability;
  std::vector<std::int64_t> observation_id;
  std::vector<std::int64_t> respondent_id;
};

/// Columnar choice observations with frozen category maps.
class ChoiceDataset {
 public:
  ChoiceDataset() = default;
  /// Validates every invariant (lengths, finite features, chosen-available,
  /// codes inside their category maps).
  explicit ChoiceDataset(DatasetColumns columns);

  std::size_t size() const { return cols_.choice.size(); }
  bool empty() const { return cols_.choice.empty(); }

  const std::vector<std::string>& feature_names() const { return cols_.feature_names; }
  bool has_feature(std::string_view name) const;
  std::span<const double> feature(std::string_view name) const;

  const std::vector<CategoryMap>& category_maps() const { return cols_.category_maps; }
  bool has_categorical(std::string_view variable) const;
  const CategoryMap& category_map(std::string_view variable) const;
  std::span<const int> codes(std::string_view variable) const;
  const std::string& label(std::string_view variable, std::size_t row) const;

  std::span<const int> choices() const { return cols_.choice; }
  const std::vector<Availability>& availability() const { return cols_.availability; }
  std::span<const std::int64_t> observation_ids() const { return cols_.observation_id; }
  std::span<const std::int64_t> respondent_ids() const { return cols_.respondent_id; }

  const DatasetColumns& columns() const { return cols_; }

  /// Rows in the given order; category maps are shared unchanged.
  ChoiceDataset subset(std::span<const std::size_t> rows) const;
  /// Keeps only the listed categorical variables (features untouched).
  ChoiceDataset with_categoricals(const std::vector<std::string>& variables) const;

 private:
  std::size_t feature_slot(std::string_view name) const;
  std::size_t categorical_slot(std::string_view variable) const;

  DatasetColumns cols_;
};

// ---------------------------------------------------------------------------
// Swissmetro filtering and derived features
// ---------------------------------------------------------------------------

struct FilterRules {
  bool drop_choice_zero = true;
  bool drop_unavailable_choice = true;
  std::vector<int> drop_age_classes{6};
  /// PURPOSE codes considered known; other codes (9 included) are dropped.
  /// This leaves 1188 respondents in the published Swissmetro file.
  std::vector<int> known_purposes{1, 2, 3, 4, 5, 6, 7, 8};
  bool merge_income_zero = true;
};

struct FeatureDefinition {
  std::string name;
  std::string definition;
};

/// Derived feature names and formulas produced by filter_and_derive.
const std::vector<FeatureDefinition>& swissmetro_feature_definitions();

/// The five categorical variables produced by filter_and_derive.
const std::vector<std::string>& swissmetro_categoricals();

/// Applies the filter rules, converts units (minutes to hours, CHF to
/// 0.01 CHF scale), builds indicator features and the directed OD label.
ChoiceDataset filter_and_derive(const RawTable& raw, const FilterRules& rules = {});

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct SplitSpec {
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> dev;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of [0, n) cut at the rounded ratios; each part sorted.
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);

struct DataSplit {
  ChoiceDataset train;
  ChoiceDataset dev;
  ChoiceDataset test;
  SplitIndices indices;
};

DataSplit split(const ChoiceDataset& data, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Encoding set
// ---------------------------------------------------------------------------

struct EncodedVariableSpec {
  std::string name;
  int k = 1;
  int original_dim = 2;
};

using EncodingSetSpec = std::vector<EncodedVariableSpec>;

/// Throws unless 1 <= K < D for every entry and names are unique.
void validate_encoding_set(const EncodingSetSpec& spec);

/// Fills original_dim from the dataset's category maps.
EncodingSetSpec resolve_encoding_set(const std::vector<std::pair<std::string, int>>& k_values,
                                     const ChoiceDataset& data);

// ---------------------------------------------------------------------------
// Canonical serialization: <dir>/dataset.csv + <dir>/dataset.json
// ---------------------------------------------------------------------------

struct PreparedDataset {
  ChoiceDataset data;
  std::optional<SplitSpec> split_spec;
  std::optional<SplitIndices> split;
};

void save_dataset(const std::filesystem::path& dir, const ChoiceDataset& data,
                  const std::optional<SplitSpec>& spec = std::nullopt,
                  const std::optional<SplitIndices>& split = std::nullopt);
PreparedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace travelemb
