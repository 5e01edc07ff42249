#include "travelemb/mnl.hpp"

#include "travelemb/report.hpp"
#include "travelemb/stats.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace travelemb {

using json = nlohmann::json;

void UtilitySpec::validate() const {
  std::set<std::string> labels;
  std::set<std::pair<std::string, int>> pairs;
  for (const auto& t : terms) {
    if (t.label.empty()) throw Error("utility spec: term without a label");
    if (!labels.insert(t.label).second) throw Error("utility spec: duplicate label " + t.label);
    bool any = false;
    for (int c = 0; c < kNumAlternatives; ++c) {
      const auto& f = t.features[static_cast<std::size_t>(c)];
      if (f.empty()) continue;
      any = true;
      if (f != "1" && !pairs.insert({f, c}).second) {
        throw Error("utility spec: feature " + f + " enters " +
                    std::string(alternative_suffix(static_cast<Alternative>(c))) + " twice");
      }
    }
    if (!any) throw Error("utility spec: term " + t.label + " enters no alternative");
  }
  std::set<std::string> vars;
  for (const auto& e : encoded) {
    if (!vars.insert(e.variable).second) throw Error("utility spec: variable " + e.variable + " encoded twice");
    if (e.alternatives.empty()) throw Error("utility spec: encoded variable " + e.variable + " enters no alternative");
  }
}

UtilitySpec base14_spec() {
  auto term = [](std::string label, std::string train, std::string sm, std::string car, std::string description) {
    return UtilityTerm{std::move(label), {std::move(train), std::move(sm), std::move(car)}, std::move(description)};
  };
  UtilitySpec spec;
  spec.terms = {
      term("ASC_Train", "1", "", "", "Alternative specific constant (Train)"),
      term("ASC_SM", "", "1", "", "Alternative specific constant (Swissmetro)"),
      term("TT_Train_SM", "TRAIN_TT", "SM_TT", "", "Travel time, hrs (Train and Swissmetro)"),
      term("TT_Car", "", "", "CAR_TT", "Travel time, hrs (Car)"),
      term("COST_Train", "TRAIN_COST", "", "", "Travel cost x (GA==0), 0.01 CHF (Train)"),
      term("COST_SM", "", "SM_COST", "", "Travel cost x (GA==0), 0.01 CHF (Swissmetro)"),
      term("COST_Car", "", "", "CAR_COST", "Travel cost, 0.01 CHF (Car)"),
      term("HE_Train", "TRAIN_HE", "", "", "Headway, hrs (Train)"),
      term("HE_SM", "", "SM_HE", "", "Headway, hrs (Swissmetro)"),
      term("SEATS_SM", "", "SM_SEATS", "", "Airline seating (Swissmetro)"),
      term("SURVEY_Train_SM", "SURVEY_TRAIN", "SURVEY_TRAIN", "", "Surveyed on a train (Train and Swissmetro)"),
      term("FIRST_FALSE_SM", "", "FIRST_FALSE", "", "Not first class (Swissmetro)"),
      term("LUGGAGE_1_Car", "", "", "LUGGAGE_1", "One piece of luggage (Car)"),
      term("LUGGAGE_GT1_Car", "", "", "LUGGAGE_GT1", "Several pieces of luggage (Car)"),
  };
  return spec;
}

std::vector<EncodedTerm> swissmetro_encoded_terms(const std::vector<std::string>& variables) {
  std::vector<EncodedTerm> out;
  for (const auto& v : variables) {
    if (v == "TICKET") {
      out.push_back({v, {Alternative::train}});
    } else {
      out.push_back({v, {Alternative::train, Alternative::swissmetro}});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Design
// ---------------------------------------------------------------------------

namespace {

std::string encoded_label(const VariableEncoding& enc, int column, Alternative alt) {
  std::string base;
  if (enc.kind == EncoderKind::dummy) {
    Eigen::Index row = 0;
    enc.matrix.col(column).maxCoeff(&row);
    base = enc.variable + "_" + enc.categories.labels[static_cast<std::size_t>(row)];
  } else {
    base = enc.variable + std::to_string(column);
  }
  return base + "_" + std::string(alternative_suffix(alt));
}

}  // namespace

Design assemble_design(const ChoiceDataset& data, const UtilitySpec& spec, const EncoderModel& encoders) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(data.size());

  struct Column {
    std::string label;
    std::array<Vector, kNumAlternatives> values;
  };
  std::vector<Column> columns;
  Design design;

  for (const auto& t : spec.terms) {
    Column col{t.label, {}};
    for (int c = 0; c < kNumAlternatives; ++c) {
      const auto& f = t.features[static_cast<std::size_t>(c)];
      if (f.empty()) {
        col.values[static_cast<std::size_t>(c)] = Vector::Zero(n);
      } else if (f == "1") {
        col.values[static_cast<std::size_t>(c)] = Vector::Ones(n);
      } else {
        if (!data.has_feature(f)) throw Error("utility spec references unknown feature " + f);
        const auto src = data.feature(f);
        col.values[static_cast<std::size_t>(c)] = Eigen::Map<const Vector>(src.data(), n);
      }
    }
    columns.push_back(std::move(col));
  }

  for (const auto& e : spec.encoded) {
    if (!encoders.contains(e.variable)) throw Error("missing encoder for " + e.variable);
    const Matrix enc = encode(encoders, data, e.variable);
    const auto& ve = encoders.at(e.variable);
    for (Alternative alt : e.alternatives) {
      design.blocks.push_back({e.variable, alt, static_cast<int>(columns.size()), ve.dim()});
      for (int j = 0; j < ve.dim(); ++j) {
        Column col{encoded_label(ve, j, alt), {}};
        for (int c = 0; c < kNumAlternatives; ++c) {
          col.values[static_cast<std::size_t>(c)] =
              c == static_cast<int>(alt) ? Vector(enc.col(j)) : Vector(Vector::Zero(n));
        }
        columns.push_back(std::move(col));
      }
    }
  }

  std::set<std::string> seen;
  for (const auto& c : columns) {
    if (!seen.insert(c.label).second) throw Error("label collision in design: " + c.label);
  }

  const auto k = static_cast<Eigen::Index>(columns.size());
  for (int c = 0; c < kNumAlternatives; ++c) {
    auto& x = design.x[static_cast<std::size_t>(c)];
    x.resize(n, k);
    for (Eigen::Index j = 0; j < k; ++j) x.col(j) = columns[static_cast<std::size_t>(j)].values[static_cast<std::size_t>(c)];
  }
  for (auto& c : columns) design.labels.push_back(std::move(c.label));
  design.choice.assign(data.choices().begin(), data.choices().end());
  design.availability = data.availability();
  return design;
}

Design drop_columns(const Design& design, const std::vector<std::string>& labels) {
  std::vector<int> keep;
  for (int j = 0; j < design.k(); ++j) {
    if (std::find(labels.begin(), labels.end(), design.labels[static_cast<std::size_t>(j)]) == labels.end()) {
      keep.push_back(j);
    }
  }
  Design out;
  out.choice = design.choice;
  out.availability = design.availability;
  for (int j : keep) out.labels.push_back(design.labels[static_cast<std::size_t>(j)]);
  for (int c = 0; c < kNumAlternatives; ++c) {
    const auto& src = design.x[static_cast<std::size_t>(c)];
    auto& dst = out.x[static_cast<std::size_t>(c)];
    dst.resize(src.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) dst.col(static_cast<Eigen::Index>(j)) = src.col(keep[j]);
  }
  for (const auto& b : design.blocks) {
    int first = -1;
    int width = 0;
    for (std::size_t j = 0; j < keep.size(); ++j) {
      if (keep[j] >= b.offset && keep[j] < b.offset + b.width) {
        if (first < 0) first = static_cast<int>(j);
        ++width;
      }
    }
    if (width > 0) out.blocks.push_back({b.variable, b.alternative, first, width});
  }
  return out;
}

std::vector<std::string> rank_deficient_columns(const Design& design) {
  const auto k = design.k();
  if (k == 0) return {};
  std::vector<std::pair<std::size_t, int>> pairs;  // (row, alternative) relative to first available
  std::vector<int> reference(design.rows(), -1);
  for (std::size_t n = 0; n < design.rows(); ++n) {
    for (int c = 0; c < kNumAlternatives; ++c) {
      if (!design.availability[n][static_cast<std::size_t>(c)]) continue;
      if (reference[n] < 0) {
        reference[n] = c;
      } else {
        pairs.emplace_back(n, c);
      }
    }
  }
  Matrix diff(static_cast<Eigen::Index>(pairs.size()), k);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto [n, c] = pairs[i];
    const auto row = static_cast<Eigen::Index>(n);
    diff.row(static_cast<Eigen::Index>(i)) = design.x[static_cast<std::size_t>(c)].row(row) -
                                             design.x[static_cast<std::size_t>(reference[n])].row(row);
  }
  std::vector<std::string> bad;
  Vector norms = diff.colwise().norm();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (norms(j) > 0) diff.col(j) /= norms(j);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(diff);
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  const auto& perm = qr.colsPermutation().indices();
  std::vector<int> cols;
  for (Eigen::Index i = rank; i < k; ++i) cols.push_back(perm(i));
  std::sort(cols.begin(), cols.end());
  for (int j : cols) bad.push_back(design.labels[static_cast<std::size_t>(j)]);
  return bad;
}

// ---------------------------------------------------------------------------
// Likelihood
// ---------------------------------------------------------------------------

namespace {

Matrix utilities(const Vector& beta, const Design& design) {
  if (beta.size() != design.k()) throw Error("coefficient count does not match design");
  Matrix u(static_cast<Eigen::Index>(design.rows()), kNumAlternatives);
  for (int c = 0; c < kNumAlternatives; ++c) u.col(c).noalias() = design.x[static_cast<std::size_t>(c)] * beta;
  return u;
}

// Masked probabilities and per-row log-likelihood contributions.
void probabilities(const Matrix& u, const Design& design, Matrix& p, double* ll) {
  const auto n = u.rows();
  p.resize(n, kNumAlternatives);
  double total = 0.0;
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
    const int y = design.choice[static_cast<std::size_t>(i)];
    total += u(i, y) - top - std::log(sum);
  }
  if (ll) *ll = total;
}

}  // namespace

double log_likelihood(const Vector& beta, const Design& design) {
  Matrix p;
  double ll = 0.0;
  probabilities(utilities(beta, design), design, p, &ll);
  return ll;
}

Matrix choice_probabilities(const Vector& beta, const Design& design) {
  Matrix p;
  probabilities(utilities(beta, design), design, p, nullptr);
  return p;
}

double null_log_likelihood(const std::vector<Availability>& availability) {
  double ll = 0.0;
  for (const auto& av : availability) {
    const auto count = std::count(av.begin(), av.end(), true);
    if (count == 0) throw Error("observation with no available alternative");
    ll -= std::log(static_cast<double>(count));
  }
  return ll;
}

void log_likelihood_derivatives(const Vector& beta, const Design& design, Vector& gradient, Matrix& hessian) {
  Matrix p;
  probabilities(utilities(beta, design), design, p, nullptr);
  const auto n = static_cast<Eigen::Index>(design.rows());
  const auto k = design.k();
  Matrix xbar = Matrix::Zero(n, k);
  gradient = Vector::Zero(k);
  hessian = Matrix::Zero(k, k);
  auto lower = hessian.selfadjointView<Eigen::Lower>();
  for (int c = 0; c < kNumAlternatives; ++c) {
    const auto& x = design.x[static_cast<std::size_t>(c)];
    const Vector pc = p.col(c);
    xbar.noalias() += pc.asDiagonal() * x;
    const Matrix scaled = pc.cwiseSqrt().asDiagonal() * x;
    lower.rankUpdate(scaled.transpose(), -1.0);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    gradient += design.x[static_cast<std::size_t>(design.choice[static_cast<std::size_t>(i)])].row(i).transpose();
  }
  gradient -= xbar.colwise().sum().transpose();
  lower.rankUpdate(xbar.transpose(), 1.0);
  hessian = Matrix(lower);
}

FitMetrics fit_metrics(double ll, double ll0, int k, std::size_t observations) {
  if (ll0 == 0.0) throw Error("null log-likelihood is zero");
  FitMetrics m;
  m.log_likelihood = ll;
  m.null_log_likelihood = ll0;
  m.r2 = 1.0 - ll / ll0;
  m.rbar2 = 1.0 - (ll - k) / ll0;
  m.aic = 2.0 * k - 2.0 * ll;
  m.observations = observations;
  return m;
}

// ---------------------------------------------------------------------------
// Estimation
// ---------------------------------------------------------------------------

std::optional<int> EstimationResult::find(std::string_view label) const {
  for (std::size_t j = 0; j < labels.size(); ++j)
    if (labels[j] == label) return static_cast<int>(j);
  return std::nullopt;
}

EstimationResult estimate(const Design& design, const EstimateOptions& options) {
  if (design.rows() == 0) throw Error("cannot estimate on an empty design");
  if (auto bad = rank_deficient_columns(design); !bad.empty()) {
    std::string list;
    for (const auto& b : bad) list += (list.empty() ? "" : ", ") + b;
    throw RankDeficiencyError("design is rank deficient; offending columns: " + list, bad);
  }

  const auto k = design.k();
  EstimationResult r;
  r.labels = design.labels;
  r.blocks = design.blocks;
  Vector beta = Vector::Zero(k);
  Vector g;
  Matrix h;
  auto& diag = r.diagnostics;
  double ll = log_likelihood(beta, design);

  for (;;) {
    log_likelihood_derivatives(beta, design, g, h);
    diag.gradient_norm = k ? g.lpNorm<Eigen::Infinity>() : 0.0;
    if (diag.gradient_norm < options.gradient_tolerance) {
      diag.converged = true;
      break;
    }
    if (diag.iterations >= options.max_iterations) break;

    const Matrix info = -h;
    Vector step;
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) step = ldlt.solve(g);
    if (step.size() != k || !step.allFinite()) step = info.completeOrthogonalDecomposition().solve(g);

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= options.max_halvings; ++halving, t *= 0.5) {
      const Vector candidate = beta + t * step;
      const double cand_ll = log_likelihood(candidate, design);
      if (std::isfinite(cand_ll) && cand_ll > ll) {
        beta = candidate;
        ll = cand_ll;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    ++diag.iterations;
    diag.beta_norm_history.push_back(beta.norm());
  }

  const Matrix info = -h;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(info, Eigen::EigenvaluesOnly);
  diag.min_information_eigenvalue = eig.eigenvalues().minCoeff();
  diag.max_information_eigenvalue = eig.eigenvalues().maxCoeff();
  Eigen::LLT<Matrix> llt(info);
  diag.hessian_singular = llt.info() != Eigen::Success ||
                          diag.min_information_eigenvalue <= 1e-12 * std::max(1.0, diag.max_information_eigenvalue);
  diag.separation_suspected = (diag.hessian_singular || !diag.converged) && beta.norm() > 10.0;

  r.beta = beta;
  if (llt.info() == Eigen::Success) {
    r.covariance = llt.solve(Matrix::Identity(k, k));
    r.covariance = 0.5 * (r.covariance + r.covariance.transpose()).eval();
  } else {
    r.covariance = Matrix::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
  }
  r.std_err = r.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  r.z = r.beta.cwiseQuotient(r.std_err);
  r.p.resize(k);
  for (int j = 0; j < k; ++j) r.p(j) = stats::two_sided_p(r.z(j));
  r.train = fit_metrics(ll, null_log_likelihood(design.availability), k, design.rows());
  return r;
}

FitMetrics evaluate(const EstimationResult& result, const Design& design) {
  if (result.labels != design.labels) throw Error("evaluate: design columns differ from the estimated model");
  return fit_metrics(log_likelihood(result.beta, design), null_log_likelihood(design.availability), result.k(),
                     design.rows());
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

namespace {

Table coefficient_table(const EstimationResult& r) {
  Table t;
  t.header = {"label", "coef", "std err", "z", "P>|z|", "sig"};
  for (int j = 0; j < r.k(); ++j) {
    t.rows.push_back({r.labels[static_cast<std::size_t>(j)], fixed(r.beta(j), 4), fixed(r.std_err(j), 4),
                      fixed(r.z(j), 3), fixed(r.p(j), 3), stats::significance_stars(r.p(j))});
  }
  return t;
}

json metrics_json(const FitMetrics& m) {
  return {{"log_likelihood", m.log_likelihood}, {"null_log_likelihood", m.null_log_likelihood},
          {"r2", m.r2},
          {"rbar2", m.rbar2},
          {"aic", m.aic},
          {"observations", m.observations}};
}

FitMetrics metrics_from(const json& j) {
  FitMetrics m;
  m.log_likelihood = j.at("log_likelihood").get<double>();
  m.null_log_likelihood = j.at("null_log_likelihood").get<double>();
  m.r2 = j.at("r2").get<double>();
  m.rbar2 = j.at("rbar2").get<double>();
  m.aic = j.at("aic").get<double>();
  m.observations = j.at("observations").get<std::size_t>();
  return m;
}

// JSON has no NaN; non-finite numbers are stored as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

std::string coefficient_table_md(const EstimationResult& r) {
  std::string out;
  out += "Observations: " + std::to_string(r.train.observations) + "  \n";
  out += "Parameters: " + std::to_string(r.k()) + "  \n";
  out += "Log-likelihood: " + fixed(r.train.log_likelihood, 3) + "  \n";
  out += "LL0: " + fixed(r.train.null_log_likelihood, 3) + "  \n";
  out += "Pseudo R2: " + fixed(r.train.r2, 4) + "  \n";
  out += "Pseudo R-bar2: " + fixed(r.train.rbar2, 4) + "  \n";
  out += "AIC: " + fixed(r.train.aic, 3) + "\n\n";
  out += coefficient_table(r).markdown();
  return out;
}

std::string coefficient_table_csv(const EstimationResult& r) { return coefficient_table(r).csv(); }

std::string result_to_json(const EstimationResult& r, const std::optional<FitMetrics>& test) {
  json j;
  j["format"] = "travelemb-estimation";
  j["version"] = 1;
  j["labels"] = r.labels;
  json coefs = json::array();
  for (int i = 0; i < r.k(); ++i) {
    coefs.push_back({{"label", r.labels[static_cast<std::size_t>(i)]},
                     {"coef", number(r.beta(i))},
                     {"std_err", number(r.std_err(i))},
                     {"z", number(r.z(i))},
                     {"p", number(r.p(i))}});
  }
  j["coefficients"] = coefs;
  json cov = json::array();
  for (int i = 0; i < r.k(); ++i) {
    json row = json::array();
    for (int c = 0; c < r.k(); ++c) row.push_back(number(r.covariance(i, c)));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  json blocks = json::array();
  for (const auto& b : r.blocks) {
    blocks.push_back({{"variable", b.variable},
                      {"alternative", alternative_suffix(b.alternative)},
                      {"offset", b.offset},
                      {"width", b.width}});
  }
  j["blocks"] = blocks;
  j["train"] = metrics_json(r.train);
  if (test) j["test"] = metrics_json(*test);
  const auto& d = r.diagnostics;
  j["diagnostics"] = {{"converged", d.converged},
                      {"iterations", d.iterations},
                      {"gradient_norm", number(d.gradient_norm)},
                      {"min_information_eigenvalue", number(d.min_information_eigenvalue)},
                      {"max_information_eigenvalue", number(d.max_information_eigenvalue)},
                      {"hessian_singular", d.hessian_singular},
                      {"separation_suspected", d.separation_suspected}};
  return j.dump(1) + "\n";
}

EstimationResult result_from_json(std::string_view text) {
  const json j = json::parse(text);
  if (j.value("format", "") != "travelemb-estimation") throw Error("not an estimation result file");
  EstimationResult r;
  r.labels = j.at("labels").get<std::vector<std::string>>();
  const auto k = static_cast<Eigen::Index>(r.labels.size());
  r.beta.resize(k);
  r.std_err.resize(k);
  r.z.resize(k);
  r.p.resize(k);
  const auto& coefs = j.at("coefficients");
  if (static_cast<Eigen::Index>(coefs.size()) != k) throw Error("estimation result: coefficient count mismatch");
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& c = coefs[static_cast<std::size_t>(i)];
    r.beta(i) = number_from(c.at("coef"));
    r.std_err(i) = number_from(c.at("std_err"));
    r.z(i) = number_from(c.at("z"));
    r.p(i) = number_from(c.at("p"));
  }
  r.covariance.resize(k, k);
  const auto& cov = j.at("covariance");
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index c = 0; c < k; ++c)
      r.covariance(i, c) = number_from(cov.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c)));
  for (const auto& b : j.at("blocks")) {
    r.blocks.push_back({b.at("variable").get<std::string>(), parse_alternative(b.at("alternative").get<std::string>()),
                        b.at("offset").get<int>(), b.at("width").get<int>()});
  }
  r.train = metrics_from(j.at("train"));
  const auto& d = j.at("diagnostics");
  r.diagnostics.converged = d.at("converged").get<bool>();
  r.diagnostics.iterations = d.at("iterations").get<int>();
  r.diagnostics.gradient_norm = number_from(d.at("gradient_norm"));
  r.diagnostics.min_information_eigenvalue = number_from(d.at("min_information_eigenvalue"));
  r.diagnostics.max_information_eigenvalue = number_from(d.at("max_information_eigenvalue"));
  r.diagnostics.hessian_singular = d.at("hessian_singular").get<bool>();
  r.diagnostics.separation_suspected = d.at("separation_suspected").get<bool>();
  return r;
}

}  // namespace travelemb
