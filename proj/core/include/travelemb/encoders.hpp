#pragma once

#include "travelemb/common.hpp"
#include "travelemb/dataset.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace travelemb {

enum class EncoderKind { dummy, pca, embedding };

std::string_view encoder_kind_name(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view text);

/// Category-to-vector map for one variable: row d of `matrix` (D x K) is the
/// encoding of category d of `categories`.
struct VariableEncoding {
  std::string variable;
  EncoderKind kind = EncoderKind::dummy;
  CategoryMap categories;
  Matrix matrix;

  // Kind-specific metadata.
  std::optional<std::string> base_category;  // dummy
  std::vector<double> eigenvalues;           // pca: all D, descending
  std::vector<double> center;                // pca: training one-hot means
  std::optional<std::uint64_t> train_seed;   // embedding

  int dim() const { return static_cast<int>(matrix.cols()); }
  int category_count() const { return static_cast<int>(matrix.rows()); }
};

/// A set of per-variable encodings, looked up by variable name.
class EncoderModel {
 public:
  EncoderModel() = default;
  explicit EncoderModel(std::vector<VariableEncoding> variables);

  void add(VariableEncoding encoding);
  bool contains(std::string_view variable) const;
  const VariableEncoding& at(std::string_view variable) const;
  const std::vector<VariableEncoding>& variables() const { return variables_; }

 private:
  std::vector<VariableEncoding> variables_;
};

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

/// D-1 indicator columns; `base` encodes to zeros.
VariableEncoding fit_dummy(const CategoryMap& map, std::string_view base);

/// Most frequent category in `data` (lowest index on ties).
std::string most_frequent_category(const ChoiceDataset& data, std::string_view variable);

/// PCA of the column-centred one-hot matrix of `variable` over `train`,
/// keeping the `k` leading components.
VariableEncoding fit_pca(const ChoiceDataset& train, std::string_view variable, int k);

/// Covariance eigenvalues of the one-hot matrix, descending.
std::vector<double> one_hot_eigenvalues(const ChoiceDataset& train, std::string_view variable);

/// Smallest K whose cumulative eigenvalue share reaches `threshold`.
int k_for_variance(std::span<const double> eigenvalues, double threshold);
int select_k_by_variance(const ChoiceDataset& train, std::string_view variable, double threshold);

/// Eigen-decomposition of a symmetric matrix with eigenvalues in descending
/// order (ties by ascending solver index) and each eigenvector flipped so its
/// largest-magnitude entry is positive.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;  // columns
};
SymmetricEigen sorted_symmetric_eigen(const Matrix& symmetric);

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

/// N x K matrix whose row n is the encoding of observation n's category.
/// Categories absent from the encoder map to the zero vector with a warning.
Matrix encode(const VariableEncoding& encoding, const ChoiceDataset& data);
Matrix encode(const EncoderModel& model, const ChoiceDataset& data, std::string_view variable);

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

std::string encoder_to_json(const EncoderModel& model);
EncoderModel encoder_from_json(std::string_view text);
void save_encoder(const std::filesystem::path& path, const EncoderModel& model);
EncoderModel load_encoder(const std::filesystem::path& path);

}  // namespace travelemb
