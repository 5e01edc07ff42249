#include "synthetic.hpp"

#include "travelemb/projection.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace travelemb;

namespace {

VariableEncoding embedding(const std::string& variable, const Matrix& m) {
  VariableEncoding e;
  e.variable = variable;
  e.kind = EncoderKind::embedding;
  std::vector<std::string> labels;
  for (Eigen::Index i = 0; i < m.rows(); ++i) labels.push_back(std::string(1, static_cast<char>('a' + i)));
  e.categories = CategoryMap::from_observed(variable, labels);
  e.matrix = m;
  return e;
}

ProjectedCoefficient row(double coef, double p) {
  ProjectedCoefficient r;
  r.variable = "X";
  r.category = std::to_string(coef);
  r.coefficient = coef;
  r.p = p;
  return r;
}

struct Fitted {
  ChoiceDataset data;
  EncoderModel encoders;
  Design design;
  EstimationResult result;
};

Fitted fit_with(EncoderKind kind) {
  testing::SyntheticOptions opts;
  opts.respondents = 150;
  Fitted f;
  f.data = testing::synthetic_dataset(opts);
  auto spec = base14_spec();
  spec.encoded = swissmetro_encoded_terms({"OD", "TICKET", "AGE"});
  Rng rng(12);
  for (const auto& [v, k] : std::vector<std::pair<std::string, int>>{{"OD", 3}, {"TICKET", 2}, {"AGE", 2}}) {
    if (kind == EncoderKind::pca) {
      f.encoders.add(fit_pca(f.data, v, k));
    } else if (kind == EncoderKind::dummy) {
      f.encoders.add(fit_dummy(f.data.category_map(v), most_frequent_category(f.data, v)));
    } else {
      Matrix m(static_cast<Eigen::Index>(f.data.category_map(v).size()), k);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
      auto e = embedding(v, m);
      e.categories = f.data.category_map(v);
      f.encoders.add(e);
    }
  }
  f.design = assemble_design(f.data, spec, f.encoders);
  f.result = estimate(f.design);
  return f;
}

}  // namespace

TEST_SUITE("projection") {
  TEST_CASE("unit vector rows reproduce the coefficients") {
    const auto enc = embedding("X", Matrix::Identity(2, 2));
    Vector beta(2);
    beta << 0.4, -1.1;
    Matrix cov(2, 2);
    cov << 0.04, 0.01, 0.01, 0.09;
    const auto rows = project(enc, Alternative::train, beta, cov);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].coefficient == 0.4);
    CHECK(rows[0].std_err == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(rows[1].coefficient == -1.1);
    CHECK(rows[1].std_err == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(rows[1].z == doctest::Approx(-1.1 / 0.3));
  }

  TEST_CASE("zero row gives zero coefficient and zero error") {
    const auto enc = embedding("X", Matrix::Zero(1, 2));
    const auto rows = project(enc, Alternative::swissmetro, Vector::Ones(2), Matrix::Identity(2, 2));
    CHECK(rows[0].coefficient == 0.0);
    CHECK(rows[0].std_err == 0.0);
    CHECK(rows[0].p == 1.0);
    CHECK_FALSE(rows[0].significant);
  }

  TEST_CASE("sum of two independent coefficients") {
    const auto enc = embedding("X", Matrix::Ones(1, 2));
    Matrix cov = Matrix::Zero(2, 2);
    cov(0, 0) = 0.3 * 0.3;
    cov(1, 1) = 0.4 * 0.4;
    const auto rows = project(enc, Alternative::train, Vector::Ones(2), cov);
    CHECK(rows[0].std_err == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("independence toggle drops the covariance") {
    const auto enc = embedding("X", Matrix::Ones(1, 2));
    Matrix cov(2, 2);
    cov << 1.0, 0.5, 0.5, 1.0;
    const auto full = project(enc, Alternative::train, Vector::Ones(2), cov);
    const auto indep = project(enc, Alternative::train, Vector::Ones(2), cov, {true});
    CHECK(full[0].std_err == doctest::Approx(std::sqrt(3.0)));
    CHECK(indep[0].std_err == doctest::Approx(std::sqrt(2.0)));
  }

  TEST_CASE("dimension mismatch and negative variance are errors") {
    const auto enc = embedding("X", Matrix::Identity(3, 3));
    CHECK_THROWS_AS(project(enc, Alternative::train, Vector::Ones(2), Matrix::Identity(2, 2)), Error);
    Matrix bad = Matrix::Identity(3, 3);
    bad(1, 1) = -1.0;
    CHECK_THROWS_AS(project(enc, Alternative::train, Vector::Ones(3), bad), Error);
  }

  TEST_CASE("filter keeps large significant rows sorted") {
    const std::vector<ProjectedCoefficient> rows{row(0.04, 0.001), row(0.10, 0.20), row(0.10, 0.01), row(-0.3, 0.0)};
    const auto kept = filter_report(rows, 0.05, 0.05);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].coefficient == -0.3);
    CHECK(kept[1].coefficient == 0.10);
    CHECK(significant_count(rows) == 0);
  }

  TEST_CASE("dummy projection is the identity on coefficients") {
    const auto f = fit_with(EncoderKind::dummy);
    const auto rows = project_all(f.result, f.encoders);
    for (const auto& r : rows) {
      const auto& enc = f.encoders.at(r.variable);
      const std::string suffix(alternative_suffix(r.alternative));
      if (enc.base_category && r.category == *enc.base_category) {
        CHECK(r.coefficient == 0.0);
        continue;
      }
      const auto idx = f.result.find(r.variable + "_" + r.category + "_" + suffix);
      REQUIRE(idx.has_value());
      CHECK(r.coefficient == f.result.beta(*idx));
      CHECK(r.std_err == doctest::Approx(f.result.std_err(*idx)).epsilon(1e-12));
    }
  }

  TEST_CASE("row counts follow categories times alternatives") {
    const auto f = fit_with(EncoderKind::pca);
    const auto rows = project_all(f.result, f.encoders);
    const auto od = f.data.category_map("OD").size();
    const auto ticket = f.data.category_map("TICKET").size();
    const auto age = f.data.category_map("AGE").size();
    CHECK(rows.size() == 2 * od + ticket + 2 * age);
  }

  TEST_CASE("projected probabilities equal embedding-space probabilities") {
    for (auto kind : {EncoderKind::embedding, EncoderKind::pca}) {
      const auto f = fit_with(kind);
      const Matrix direct = choice_probabilities(f.result.beta, f.design);
      const Matrix projected = projected_probabilities(f.result, f.encoders, f.design, f.data);
      CHECK((direct - projected).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("missing or partial blocks are errors") {
    auto f = fit_with(EncoderKind::pca);
    auto extra = f.encoders;
    extra.add(fit_pca(f.data, "WHO", 1));
    CHECK_THROWS_AS(project_all(f.result, extra), Error);
    auto partial = f.result;
    partial.blocks[0].width -= 1;
    CHECK_THROWS_AS(project_all(partial, f.encoders), Error);
  }

  TEST_CASE("tables report the significant share") {
    const auto f = fit_with(EncoderKind::pca);
    const auto rows = project_all(f.result, f.encoders);
    const auto md = projection_table_md(rows);
    CHECK(md.find("Significant (p<0.05): " + std::to_string(significant_count(rows)) + " of " +
                  std::to_string(rows.size())) != std::string::npos);
    const auto csv = projection_table_csv(rows);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == rows.size() + 1);
  }
}
