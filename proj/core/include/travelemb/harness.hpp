#pragma once

#include "travelemb/dataset.hpp"
#include "travelemb/embed_train.hpp"
#include "travelemb/encoders.hpp"
#include "travelemb/mds.hpp"
#include "travelemb/mnl.hpp"
#include "travelemb/projection.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace travelemb {

enum class ModelKind { original, dummy_full, dummy_reduced, pca, embeddings };

std::string_view model_name(ModelKind kind);
ModelKind parse_model(std::string_view text);

enum class SweepScenario { light, bigdata };

std::string_view scenario_name(SweepScenario scenario);
SweepScenario parse_scenario(std::string_view text);

/// Base-model features fed straight into the embedding network's softmax.
std::vector<std::string> default_covariates();

/// Network defaults with default_covariates() as covariates.
EmbeddingNetConfig default_network_settings();

struct SweepSettings {
  std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<SweepScenario> scenarios{SweepScenario::light, SweepScenario::bigdata};
  /// Embedding repeats per scenario; 0 uses the comparison's repeat count.
  int repeats = 0;
};

struct ExperimentConfig {
  std::filesystem::path dataset;  // raw CSV or a prepared dataset directory
  std::uint64_t seed = 42;
  SplitSpec split;
  std::vector<std::pair<std::string, int>> k_values{{"OD", 3}, {"TICKET", 5}, {"WHO", 1}, {"AGE", 3}, {"INCOME", 3}};
  /// Embedding network settings; `variables` is filled from k_values.
  EmbeddingNetConfig embeddings = default_network_settings();
  std::vector<ModelKind> roster{ModelKind::original, ModelKind::dummy_full, ModelKind::dummy_reduced,
                                ModelKind::pca, ModelKind::embeddings};
  EstimateOptions estimation;
  SweepSettings sweep;
  std::filesystem::path output_dir{"runs/experiment"};

  void validate() const;
};

/// Split seed and embedding base seed, both derived from the experiment seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);

/// Network config with variables from `k_values` and seed derived from the
/// experiment seed.
EmbeddingNetConfig network_config(const ExperimentConfig& config);

/// Loads a prepared dataset directory (using its stored split when present)
/// or a raw CSV (filtered, derived, then split with `spec`).
DataSplit load_split(const std::filesystem::path& path, const SplitSpec& spec);

/// Encoder for `variable`: dummy (most frequent category on `train` as
/// base), PCA fitted on `train`, or taken from `embedding`.
VariableEncoding make_encoding(EncoderKind kind, const ChoiceDataset& train, const std::string& variable, int k);

struct ComparisonRow {
  std::string model;
  bool ok = false;
  std::string error;
  int parameters = 0;
  FitMetrics train;
  FitMetrics test;
  std::vector<std::string> dropped_columns;
  // Embedding rows only.
  std::optional<double> test_ll_std;
  int repeats = 0;
  int diverged = 0;
};

struct RepeatSummary {
  std::uint64_t seed = 0;
  double dev_network_ll = 0.0;
  double train_ll = 0.0;
  double test_ll = 0.0;
  bool ok = false;
};

struct ComparisonResult {
  std::vector<ComparisonRow> rows;
  std::map<std::string, EstimationResult> estimates;
  std::map<std::string, EncoderModel> encoders;
  std::vector<RepeatSummary> repeats;
  std::optional<TrainRun> best_run;
  std::vector<ProjectedCoefficient> projected;
  std::vector<MdsLayout> layouts;
  std::map<std::string, double> timings;  // seconds

  bool any_failed() const;
};

ComparisonResult run_comparison(const ExperimentConfig& config, const DataSplit& data);
ComparisonResult run_comparison(const ExperimentConfig& config);

struct SweepPoint {
  double fraction = 0.0;
  std::size_t observations = 0;
  /// Test pseudo R^2 per model; absent when not estimable or negative.
  std::map<std::string, std::optional<double>> test_r2;
};

struct SweepResult {
  SweepScenario scenario = SweepScenario::light;
  std::vector<SweepPoint> points;
  double seconds = 0.0;
};

SweepResult run_sweep(const ExperimentConfig& config, const DataSplit& data, SweepScenario scenario);

struct ReportFiles {
  std::vector<std::filesystem::path> written;
};

ReportFiles export_report(const ExperimentConfig& config, const ComparisonResult* comparison,
                          const std::vector<SweepResult>& sweeps, const std::filesystem::path& directory);

std::string summary_table_md(const std::vector<ComparisonRow>& rows);
std::string summary_table_csv(const std::vector<ComparisonRow>& rows);
std::string sweep_csv(const SweepResult& sweep);
std::string sweep_svg(const SweepResult& sweep);

}  // namespace travelemb
