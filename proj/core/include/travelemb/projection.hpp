#pragma once

#include "travelemb/encoders.hpp"
#include "travelemb/mnl.hpp"

#include <string>
#include <vector>

namespace travelemb {

struct ProjectedCoefficient {
  std::string variable;
  std::string category;
  std::string display;
  Alternative alternative = Alternative::train;
  double coefficient = 0.0;
  double std_err = 0.0;
  double z = 0.0;
  double p = 1.0;
  bool significant = false;  // p < 0.05
};

struct ProjectionOptions {
  /// Ignore covariances between the K coefficients of a block.
  bool independent = false;
};

/// Per-category coefficients w_d . beta with variance w_d' cov w_d.
std::vector<ProjectedCoefficient> project(const VariableEncoding& encoding, Alternative alternative,
                                          const Vector& beta, const Matrix& covariance,
                                          const ProjectionOptions& options = {});

/// Projects every encoded block of `result`. Each encoder variable must have
/// complete blocks in the result.
std::vector<ProjectedCoefficient> project_all(const EstimationResult& result, const EncoderModel& encoders,
                                              const ProjectionOptions& options = {});

std::size_t significant_count(const std::vector<ProjectedCoefficient>& rows);

/// Rows with |coef| > min_abs and p < alpha, stable-sorted by variable then
/// category.
std::vector<ProjectedCoefficient> filter_report(const std::vector<ProjectedCoefficient>& rows, double min_abs,
                                                double alpha);

/// N x C probabilities where every encoded block contributes its projected
/// per-category coefficient instead of w_d . beta.
Matrix projected_probabilities(const EstimationResult& result, const EncoderModel& encoders, const Design& design,
                               const ChoiceDataset& data, const ProjectionOptions& options = {});

std::string projection_table_md(const std::vector<ProjectedCoefficient>& rows);
std::string projection_table_csv(const std::vector<ProjectedCoefficient>& rows);
std::string projection_table_json(const std::vector<ProjectedCoefficient>& rows);

}  // namespace travelemb
