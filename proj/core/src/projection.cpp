#include "travelemb/projection.hpp"

#include "travelemb/report.hpp"
#include "travelemb/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace travelemb {

std::vector<ProjectedCoefficient> project(const VariableEncoding& encoding, Alternative alternative,
                                          const Vector& beta, const Matrix& covariance,
                                          const ProjectionOptions& options) {
  const auto k = encoding.matrix.cols();
  if (beta.size() != k || covariance.rows() != k || covariance.cols() != k) {
    throw Error("projection: coefficient block of size " + std::to_string(beta.size()) + " does not match K=" +
                std::to_string(k) + " for " + encoding.variable);
  }
  const Matrix cov = options.independent ? Matrix(covariance.diagonal().asDiagonal()) : covariance;
  std::vector<ProjectedCoefficient> out;
  for (Eigen::Index d = 0; d < encoding.matrix.rows(); ++d) {
    const Vector w = encoding.matrix.row(d).transpose();
    double variance = w.dot(cov * w);
    if (variance < -1e-12) {
      throw Error("projection: negative propagated variance for " + encoding.variable + " category " +
                  encoding.categories.labels[static_cast<std::size_t>(d)]);
    }
    variance = std::max(variance, 0.0);
    ProjectedCoefficient row;
    row.variable = encoding.variable;
    row.category = encoding.categories.labels[static_cast<std::size_t>(d)];
    row.display = encoding.categories.display_name(static_cast<int>(d));
    row.alternative = alternative;
    row.coefficient = w.dot(beta);
    row.std_err = std::sqrt(variance);
    if (row.std_err > 0.0) {
      row.z = row.coefficient / row.std_err;
      row.p = stats::two_sided_p(row.z);
    } else if (std::isnan(row.std_err)) {
      row.z = row.p = std::numeric_limits<double>::quiet_NaN();
    } else {
      // A fixed coefficient: exactly zero carries no evidence, anything else is certain.
      row.z = row.coefficient == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), row.coefficient);
      row.p = row.coefficient == 0.0 ? 1.0 : 0.0;
    }
    row.significant = row.p < 0.05;
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<ProjectedCoefficient> project_all(const EstimationResult& result, const EncoderModel& encoders,
                                              const ProjectionOptions& options) {
  std::vector<ProjectedCoefficient> out;
  for (const auto& enc : encoders.variables()) {
    const bool labelled = std::any_of(result.blocks.begin(), result.blocks.end(),
                                      [&](const EncodedBlock& b) { return b.variable == enc.variable; });
    if (!labelled) throw Error("projection: result has no labelled block for " + enc.variable);
  }
  for (const auto& b : result.blocks) {
    if (!encoders.contains(b.variable)) continue;
    const auto& enc = encoders.at(b.variable);
    if (b.width != enc.dim()) {
      throw Error("projection: partial block for " + b.variable + "_" + std::string(alternative_suffix(b.alternative)) +
                  " (" + std::to_string(b.width) + " of " + std::to_string(enc.dim()) + " columns)");
    }
    if (b.offset < 0 || b.offset + b.width > result.k()) throw Error("projection: block outside the coefficient vector");
    const Vector beta = result.beta.segment(b.offset, b.width);
    const Matrix cov = result.covariance.block(b.offset, b.offset, b.width, b.width);
    auto rows = project(enc, b.alternative, beta, cov, options);
    out.insert(out.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
  }
  return out;
}

std::size_t significant_count(const std::vector<ProjectedCoefficient>& rows) {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const ProjectedCoefficient& r) { return r.significant; }));
}

std::vector<ProjectedCoefficient> filter_report(const std::vector<ProjectedCoefficient>& rows, double min_abs,
                                                double alpha) {
  std::vector<ProjectedCoefficient> out;
  for (const auto& r : rows) {
    if (std::abs(r.coefficient) > min_abs && r.p < alpha) out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const ProjectedCoefficient& a, const ProjectedCoefficient& b) {
    if (a.variable != b.variable) return a.variable < b.variable;
    return a.category < b.category;
  });
  return out;
}

Matrix projected_probabilities(const EstimationResult& result, const EncoderModel& encoders, const Design& design,
                               const ChoiceDataset& data, const ProjectionOptions& options) {
  if (result.labels != design.labels) throw Error("projection: design columns differ from the estimated model");
  if (data.size() != design.rows()) throw Error("projection: dataset and design row counts differ");
  const auto rows = project_all(result, encoders, options);

  // Zero the encoded columns, then add each block's projected coefficient.
  Vector beta = result.beta;
  for (const auto& b : result.blocks) {
    if (encoders.contains(b.variable)) beta.segment(b.offset, b.width).setZero();
  }
  const auto n = static_cast<Eigen::Index>(design.rows());
  Matrix u(n, kNumAlternatives);
  for (int c = 0; c < kNumAlternatives; ++c) u.col(c).noalias() = design.x[static_cast<std::size_t>(c)] * beta;

  std::size_t cursor = 0;
  for (const auto& b : result.blocks) {
    if (!encoders.contains(b.variable)) continue;
    const auto& enc = encoders.at(b.variable);
    const auto count = static_cast<std::size_t>(enc.category_count());
    const auto& map = data.category_map(b.variable);
    // Dataset code -> encoder row.
    std::vector<std::optional<int>> lookup;
    for (const auto& label : map.labels) lookup.push_back(enc.categories.find(label));
    const auto codes = data.codes(b.variable);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = lookup[static_cast<std::size_t>(codes[static_cast<std::size_t>(i)])];
      if (row) u(i, static_cast<int>(b.alternative)) += rows[cursor + static_cast<std::size_t>(*row)].coefficient;
    }
    cursor += count;
  }

  Matrix p(n, kNumAlternatives);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& av = design.availability[static_cast<std::size_t>(i)];
    double top = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < kNumAlternatives; ++c)
      if (av[static_cast<std::size_t>(c)]) top = std::max(top, u(i, c));
    double sum = 0.0;
    for (int c = 0; c < kNumAlternatives; ++c) {
      p(i, c) = av[static_cast<std::size_t>(c)] ? std::exp(u(i, c) - top) : 0.0;
      sum += p(i, c);
    }
    p.row(i) /= sum;
  }
  return p;
}

namespace {

Table projection_table(const std::vector<ProjectedCoefficient>& rows) {
  Table t;
  t.header = {"variable", "category", "name", "alternative", "coef", "std err", "z", "P>|z|", "sig"};
  for (const auto& r : rows) {
    t.rows.push_back({r.variable, r.category, r.display, std::string(alternative_suffix(r.alternative)),
                      fixed(r.coefficient, 4), fixed(r.std_err, 4), fixed(r.z, 3), fixed(r.p, 3),
                      stats::significance_stars(r.p)});
  }
  return t;
}

}  // namespace

std::string projection_table_md(const std::vector<ProjectedCoefficient>& rows) {
  return projection_table(rows).markdown() + "\nSignificant (p<0.05): " + std::to_string(significant_count(rows)) +
         " of " + std::to_string(rows.size()) + "\n";
}

std::string projection_table_csv(const std::vector<ProjectedCoefficient>& rows) {
  return projection_table(rows).csv();
}

std::string projection_table_json(const std::vector<ProjectedCoefficient>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    out.push_back({{"variable", r.variable},
                   {"category", r.category},
                   {"name", r.display},
                   {"alternative", alternative_suffix(r.alternative)},
                   {"coef", num(r.coefficient)},
                   {"std_err", num(r.std_err)},
                   {"z", num(r.z)},
                   {"p", num(r.p)},
                   {"significant", r.significant}});
  }
  return nlohmann::json{{"rows", out}, {"significant", significant_count(rows)}, {"total", rows.size()}}.dump(1) +
         "\n";
}

}  // namespace travelemb
