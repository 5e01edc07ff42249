#pragma once

#include "travelemb/common.hpp"

#include <string>
#include <vector>

namespace travelemb {

struct MdsLayout {
  std::vector<std::string> labels;
  Matrix coordinates;  // D x dim, column means zero
  Vector eigenvalues;  // the `dim` leading eigenvalues of the centred Gram matrix
  double stress = 0.0;  // Kruskal stress-1 between input and output distances
  bool degenerate = false;  // fewer than `dim` positive eigenvalues
};

/// Euclidean distances between the rows of `points`.
Matrix pairwise_distances(const Matrix& points);

/// Classical (Torgerson) scaling of a distance matrix.
MdsLayout classical_mds(const Matrix& distances, std::vector<std::string> labels, int dim = 2);

/// sqrt(sum (d_in - d_out)^2 / sum d_in^2) over i < j.
double kruskal_stress(const Matrix& input, const Matrix& output);

std::string mds_csv(const MdsLayout& layout);
std::string mds_svg(const MdsLayout& layout, const std::string& title);

}  // namespace travelemb
