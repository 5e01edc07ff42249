#pragma once

#include "travelemb/common.hpp"
#include "travelemb/dataset.hpp"
#include "travelemb/encoders.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace travelemb {

/// One coefficient. `features[c]` names the dataset column entering
/// alternative c ("1" for a constant); empty means the term is absent there.
/// A term present in several alternatives is a shared coefficient.
struct UtilityTerm {
  std::string label;
  std::array<std::string, kNumAlternatives> features;
  std::string description;
};

/// An encoded categorical variable entering the listed alternatives with
/// alternative-specific coefficients.
struct EncodedTerm {
  std::string variable;
  std::vector<Alternative> alternatives;
};

struct UtilitySpec {
  std::vector<UtilityTerm> terms;
  std::vector<EncodedTerm> encoded;
  Alternative base = Alternative::car;

  void validate() const;
};

/// The 14-coefficient Swissmetro baseline.
UtilitySpec base14_spec();

/// Encoded terms for the five Swissmetro categoricals: TICKET enters Train
/// only, the others enter Train and SM.
std::vector<EncodedTerm> swissmetro_encoded_terms(const std::vector<std::string>& variables);

/// Where one encoded variable's columns sit for one alternative.
struct EncodedBlock {
  std::string variable;
  Alternative alternative = Alternative::train;
  int offset = 0;
  int width = 0;
};

/// Per-alternative design matrices (N x k each) sharing one coefficient
/// vector.
struct Design {
  std::vector<std::string> labels;
  std::array<Matrix, kNumAlternatives> x;
  std::vector<int> choice;
  std::vector<Availability> availability;
  std::vector<EncodedBlock> blocks;

  std::size_t rows() const { return choice.size(); }
  int k() const { return static_cast<int>(labels.size()); }
};

Design assemble_design(const ChoiceDataset& data, const UtilitySpec& spec, const EncoderModel& encoders);

/// Removes the named columns (blocks are adjusted; a block emptied entirely
/// is removed).
Design drop_columns(const Design& design, const std::vector<std::string>& labels);

/// Columns that make the design rank deficient on utility differences,
/// judged by a column-pivoted QR. Empty when the design has full rank.
std::vector<std::string> rank_deficient_columns(const Design& design);

double log_likelihood(const Vector& beta, const Design& design);
/// N x C probabilities, exactly zero where unavailable.
Matrix choice_probabilities(const Vector& beta, const Design& design);
/// Log-likelihood of the availability-aware uniform model.
double null_log_likelihood(const std::vector<Availability>& availability);

/// Gradient and Hessian of the log-likelihood.
void log_likelihood_derivatives(const Vector& beta, const Design& design, Vector& gradient, Matrix& hessian);

struct FitMetrics {
  double log_likelihood = 0.0;
  double null_log_likelihood = 0.0;
  double r2 = 0.0;
  double rbar2 = 0.0;
  double aic = 0.0;
  std::size_t observations = 0;
};

/// R^2 = 1 - LL/LL0, Rbar^2 = 1 - (LL - k)/LL0, AIC = 2k - 2LL.
FitMetrics fit_metrics(double ll, double ll0, int k, std::size_t observations = 0);

struct EstimateOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  int max_halvings = 50;
};

struct EstimationDiagnostics {
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;  // infinity norm at the final iterate
  std::vector<double> beta_norm_history;
  double min_information_eigenvalue = 0.0;
  double max_information_eigenvalue = 0.0;
  bool hessian_singular = false;
  bool separation_suspected = false;
};

class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(const std::string& what, std::vector<std::string> columns)
      : Error(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

struct EstimationResult {
  std::vector<std::string> labels;
  Vector beta;
  Matrix covariance;
  Vector std_err;
  Vector z;
  Vector p;
  std::vector<EncodedBlock> blocks;
  FitMetrics train;
  EstimationDiagnostics diagnostics;

  int k() const { return static_cast<int>(beta.size()); }
  std::optional<int> find(std::string_view label) const;
};

/// Damped Newton maximum likelihood. Throws RankDeficiencyError when the
/// design is not of full column rank.
EstimationResult estimate(const Design& design, const EstimateOptions& options = {});

/// Metrics of `result` on another split's design (same columns).
FitMetrics evaluate(const EstimationResult& result, const Design& design);

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

std::string coefficient_table_md(const EstimationResult& result);
std::string coefficient_table_csv(const EstimationResult& result);
std::string result_to_json(const EstimationResult& result, const std::optional<FitMetrics>& test = std::nullopt);
EstimationResult result_from_json(std::string_view text);

}  // namespace travelemb
