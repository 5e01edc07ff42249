#include "oracle.hpp"

#include "travelemb/common.hpp"
#include "travelemb/mds.hpp"

#include <doctest.h>

#include <cmath>

using namespace travelemb;

namespace {

Matrix random_points(Rng& rng, int n, int k) {
  Matrix m(n, k);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

std::vector<std::string> names(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("c" + std::to_string(i));
  return out;
}

}  // namespace

TEST_SUITE("mds") {
  TEST_CASE("distances of a 3-4-5 triangle") {
    Matrix p(3, 2);
    p << 0, 0, 3, 4, 0, 0;
    const Matrix d = pairwise_distances(p);
    CHECK(d(0, 1) == 5.0);
    CHECK(d(1, 0) == 5.0);
    CHECK(d(0, 2) == 0.0);
    CHECK(d.diagonal().isZero());
  }

  TEST_CASE("two-dimensional points are reproduced exactly") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix points = random_points(rng, 7, 2);
      const Matrix d = pairwise_distances(points);
      const auto layout = classical_mds(d, names(7));
      CHECK_FALSE(layout.degenerate);
      CHECK((pairwise_distances(layout.coordinates) - d).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(layout.stress < 1e-8);
      CHECK(layout.coordinates.colwise().sum().cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("equidistant points form an equilateral triangle") {
    Matrix d = Matrix::Constant(3, 3, 2.5);
    d.diagonal().setZero();
    const auto layout = classical_mds(d, names(3));
    const Matrix out = pairwise_distances(layout.coordinates);
    CHECK(std::abs(out(0, 1) - out(0, 2)) < 1e-8);
    CHECK(std::abs(out(0, 1) - out(1, 2)) < 1e-8);
    CHECK(std::abs(out(0, 1) - 2.5) < 1e-8);
  }

  TEST_CASE("three-dimensional points match the oracle") {
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix points = random_points(rng, 8, 3);
      const Matrix d = pairwise_distances(points);
      const auto layout = classical_mds(d, names(8));
      const Matrix expected = testing::oracle_mds(d, 2);
      CHECK((pairwise_distances(layout.coordinates) - pairwise_distances(expected)).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(testing::max_abs_diff_up_to_sign(expected, layout.coordinates) < 1e-8);
      CHECK(layout.stress > 0.0);
      CHECK(layout.stress == doctest::Approx(kruskal_stress(d, pairwise_distances(layout.coordinates))));
    }
  }

  TEST_CASE("stress does not increase with more dimensions") {
    Rng rng(21);
    const Matrix points = random_points(rng, 9, 4);
    const Matrix d = pairwise_distances(points);
    double previous = 1.0;
    for (int dim = 1; dim <= 4; ++dim) {
      const auto layout = classical_mds(d, names(9), dim);
      CHECK(layout.stress <= previous + 1e-12);
      previous = layout.stress;
    }
    CHECK(previous < 1e-8);
  }

  TEST_CASE("collinear points are flagged degenerate") {
    Matrix p(4, 1);
    p << 0, 1, 3, 7;
    const auto layout = classical_mds(pairwise_distances(p), names(4));
    CHECK(layout.degenerate);
    CHECK(layout.stress < 1e-8);
  }

  TEST_CASE("invalid distance matrices are rejected") {
    CHECK_THROWS_AS(classical_mds(Matrix::Zero(2, 3), names(2)), Error);
    CHECK_THROWS_AS(classical_mds(Matrix::Zero(2, 2), names(2)), Error);
    Matrix asym = Matrix::Ones(3, 3);
    asym.diagonal().setZero();
    asym(0, 1) = 2.0;
    CHECK_THROWS_AS(classical_mds(asym, names(3)), Error);
    Matrix nan = Matrix::Ones(3, 3);
    nan(1, 2) = nan(2, 1) = std::nan("");
    CHECK_THROWS_AS(classical_mds(nan, names(3)), Error);
  }

  TEST_CASE("csv and svg output") {
    Matrix d = Matrix::Constant(3, 3, 1.0);
    d.diagonal().setZero();
    const auto layout = classical_mds(d, {"A", "B", "C"});
    const auto csv = mds_csv(layout);
    CHECK(csv.rfind("label,x,y\n", 0) == 0);
    CHECK(csv.find("\nB,") != std::string::npos);
    const auto svg = mds_svg(layout, "demo");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find(">C<") != std::string::npos);
  }
}
