#include "travelemb/mds.hpp"

#include "travelemb/encoders.hpp"
#include "travelemb/report.hpp"

#include <algorithm>
#include <cmath>

namespace travelemb {

Matrix pairwise_distances(const Matrix& points) {
  if (!points.allFinite()) throw Error("pairwise distances: non-finite input");
  const auto n = points.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (points.row(i) - points.row(j)).norm();
    }
  }
  return d;
}

double kruskal_stress(const Matrix& input, const Matrix& output) {
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index i = 0; i < input.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < input.cols(); ++j) {
      const double diff = input(i, j) - output(i, j);
      num += diff * diff;
      den += input(i, j) * input(i, j);
    }
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

MdsLayout classical_mds(const Matrix& distances, std::vector<std::string> labels, int dim) {
  const auto n = distances.rows();
  if (distances.cols() != n) throw Error("MDS: distance matrix must be square");
  if (n < 3) throw Error("MDS: at least 3 points are required");
  if (dim < 1 || dim > n) throw Error("MDS: invalid output dimension");
  if (!distances.allFinite()) throw Error("MDS: non-finite distance");
  if ((distances - distances.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, distances.cwiseAbs().maxCoeff())) {
    throw Error("MDS: distance matrix is not symmetric");
  }
  if (labels.empty()) {
    for (Eigen::Index i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  }
  if (static_cast<Eigen::Index>(labels.size()) != n) throw Error("MDS: label count differs from point count");

  const Matrix sq = distances.array().square().matrix();
  const Matrix j = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  Matrix gram = -0.5 * j * sq * j;
  gram = 0.5 * (gram + gram.transpose()).eval();
  const auto eig = sorted_symmetric_eigen(gram);

  MdsLayout out;
  out.labels = std::move(labels);
  out.eigenvalues = eig.values.head(dim);
  out.coordinates.resize(n, dim);
  const double tol = 1e-10 * std::max(1.0, std::abs(eig.values(0)));
  int positive = 0;
  for (int c = 0; c < dim; ++c) {
    const double lambda = eig.values(c);
    if (lambda > tol) ++positive;
    out.coordinates.col(c) = eig.vectors.col(c) * std::sqrt(std::max(lambda, 0.0));
  }
  out.degenerate = positive < dim;
  // Remove rounding drift so the layout is centred exactly.
  out.coordinates.rowwise() -= out.coordinates.colwise().mean();
  out.stress = kruskal_stress(distances, pairwise_distances(out.coordinates));
  return out;
}

std::string mds_csv(const MdsLayout& layout) {
  Table t;
  t.header = {"label", "x", "y"};
  for (Eigen::Index i = 0; i < layout.coordinates.rows(); ++i) {
    const double y = layout.coordinates.cols() > 1 ? layout.coordinates(i, 1) : 0.0;
    t.rows.push_back({layout.labels[static_cast<std::size_t>(i)], fixed(layout.coordinates(i, 0), 10), fixed(y, 10)});
  }
  return t.csv();
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string mds_svg(const MdsLayout& layout, const std::string& title) {
  constexpr double size = 640.0;
  constexpr double margin = 60.0;
  const auto n = layout.coordinates.rows();
  Vector xs = layout.coordinates.col(0);
  Vector ys = layout.coordinates.cols() > 1 ? Vector(layout.coordinates.col(1)) : Vector(Vector::Zero(n));
  const double span = std::max({xs.maxCoeff() - xs.minCoeff(), ys.maxCoeff() - ys.minCoeff(), 1e-12});
  const double cx = 0.5 * (xs.maxCoeff() + xs.minCoeff());
  const double cy = 0.5 * (ys.maxCoeff() + ys.minCoeff());
  const double scale = (size - 2 * margin) / span;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" viewBox=\"0 0 640 640\">\n";
  svg += "<rect width=\"640\" height=\"640\" fill=\"white\"/>\n";
  svg += "<text x=\"320\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">" +
         xml_escape(title) + "</text>\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    const double px = size / 2 + (xs(i) - cx) * scale;
    const double py = size / 2 - (ys(i) - cy) * scale;
    svg += "<circle cx=\"" + fixed(px, 2) + "\" cy=\"" + fixed(py, 2) + "\" r=\"3\" fill=\"steelblue\"/>\n";
    svg += "<text x=\"" + fixed(px + 5, 2) + "\" y=\"" + fixed(py - 5, 2) +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + xml_escape(layout.labels[static_cast<std::size_t>(i)]) +
           "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace travelemb
