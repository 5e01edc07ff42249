#include "travelemb/encoders.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace travelemb {

using json = nlohmann::json;

std::string_view encoder_kind_name(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::dummy: return "dummy";
    case EncoderKind::pca: return "pca";
    case EncoderKind::embedding: return "embedding";
  }
  return "?";
}

EncoderKind parse_encoder_kind(std::string_view text) {
  if (text == "dummy") return EncoderKind::dummy;
  if (text == "pca") return EncoderKind::pca;
  if (text == "embedding" || text == "embeddings") return EncoderKind::embedding;
  throw Error("unknown encoding kind '" + std::string(text) + "'");
}

EncoderModel::EncoderModel(std::vector<VariableEncoding> variables) {
  for (auto& v : variables) add(std::move(v));
}

void EncoderModel::add(VariableEncoding encoding) {
  if (encoding.matrix.rows() != static_cast<Eigen::Index>(encoding.categories.size())) {
    throw Error("encoder " + encoding.variable + ": matrix rows do not match category count");
  }
  if (!encoding.matrix.allFinite()) throw Error("encoder " + encoding.variable + ": non-finite entries");
  for (auto& existing : variables_) {
    if (existing.variable == encoding.variable) {
      existing = std::move(encoding);
      return;
    }
  }
  variables_.push_back(std::move(encoding));
}

bool EncoderModel::contains(std::string_view variable) const {
  return std::any_of(variables_.begin(), variables_.end(),
                     [&](const VariableEncoding& v) { return v.variable == variable; });
}

const VariableEncoding& EncoderModel::at(std::string_view variable) const {
  for (const auto& v : variables_) {
    if (v.variable == variable) return v;
  }
  throw Error("no encoder for variable " + std::string(variable));
}

// ---------------------------------------------------------------------------

VariableEncoding fit_dummy(const CategoryMap& map, std::string_view base) {
  if (map.size() < 2) throw Error("dummy encoding of " + map.variable + " needs at least 2 categories");
  const auto base_index = map.find(base);
  if (!base_index) throw Error("dummy encoding of " + map.variable + ": base '" + std::string(base) + "' not found");

  VariableEncoding enc;
  enc.variable = map.variable;
  enc.kind = EncoderKind::dummy;
  enc.categories = map;
  enc.base_category = std::string(base);
  const auto d = static_cast<Eigen::Index>(map.size());
  enc.matrix = Matrix::Zero(d, d - 1);
  Eigen::Index col = 0;
  for (Eigen::Index row = 0; row < d; ++row) {
    if (row == *base_index) continue;
    enc.matrix(row, col++) = 1.0;
  }
  return enc;
}

std::string most_frequent_category(const ChoiceDataset& data, std::string_view variable) {
  const auto& map = data.category_map(variable);
  std::vector<std::size_t> counts(map.size(), 0);
  for (int c : data.codes(variable)) ++counts[static_cast<std::size_t>(c)];
  const auto best = std::max_element(counts.begin(), counts.end()) - counts.begin();
  return map.labels[static_cast<std::size_t>(best)];
}

SymmetricEigen sorted_symmetric_eigen(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric);
  if (solver.info() != Eigen::Success) throw Error("symmetric eigendecomposition failed");
  const Eigen::Index n = symmetric.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Vector& values = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto src = order[static_cast<std::size_t>(j)];
    out.values(j) = values(src);
    Vector v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
      // First index wins among (near-)equal magnitudes.
      if (std::abs(v(i)) > std::abs(v(arg)) + 1e-12) arg = i;
    }
    if (v(arg) < 0.0) v = -v;
    out.vectors.col(j) = v;
  }
  return out;
}

namespace {

struct OneHotMoments {
  Vector mean;
  Matrix covariance;
};

OneHotMoments one_hot_moments(const ChoiceDataset& train, std::string_view variable) {
  if (train.empty()) throw Error("PCA needs a non-empty training split");
  const auto d = static_cast<Eigen::Index>(train.category_map(variable).size());
  const auto codes = train.codes(variable);
  const double n = static_cast<double>(codes.size());
  Vector counts = Vector::Zero(d);
  for (int c : codes) counts(c) += 1.0;
  OneHotMoments m;
  m.mean = counts / n;
  // Covariance of one-hot rows: diag(p) - p p^T (population normalisation).
  m.covariance = Matrix(m.mean.asDiagonal()) - m.mean * m.mean.transpose();
  return m;
}

void require_non_degenerate(const Matrix& cov, std::string_view variable) {
  if (cov.cwiseAbs().maxCoeff() <= 1e-15) {
    throw Error("variable " + std::string(variable) + " is degenerate (single observed category)");
  }
}

}  // namespace

VariableEncoding fit_pca(const ChoiceDataset& train, std::string_view variable, int k) {
  const auto& map = train.category_map(variable);
  const int d = static_cast<int>(map.size());
  if (d < 2) throw Error("variable " + std::string(variable) + " is degenerate (single category)");
  if (k < 1 || k > d) {
    throw Error("PCA of " + std::string(variable) + ": K=" + std::to_string(k) + " outside [1, " +
                std::to_string(d) + "]");
  }
  const auto moments = one_hot_moments(train, variable);
  require_non_degenerate(moments.covariance, variable);
  const auto eig = sorted_symmetric_eigen(moments.covariance);

  VariableEncoding enc;
  enc.variable = std::string(variable);
  enc.kind = EncoderKind::pca;
  enc.categories = map;
  const Matrix components = eig.vectors.leftCols(k);
  // Row d: (e_d - mean)^T V.
  const Matrix centered = Matrix::Identity(d, d) - Vector::Ones(d) * moments.mean.transpose();
  enc.matrix = centered * components;
  enc.eigenvalues.assign(eig.values.data(), eig.values.data() + eig.values.size());
  enc.center.assign(moments.mean.data(), moments.mean.data() + moments.mean.size());
  return enc;
}

std::vector<double> one_hot_eigenvalues(const ChoiceDataset& train, std::string_view variable) {
  const auto moments = one_hot_moments(train, variable);
  require_non_degenerate(moments.covariance, variable);
  const auto eig = sorted_symmetric_eigen(moments.covariance);
  return {eig.values.data(), eig.values.data() + eig.values.size()};
}

int k_for_variance(std::span<const double> eigenvalues, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw Error("variance threshold must lie in (0,1]");
  double total = 0.0;
  double largest = 0.0;
  for (double v : eigenvalues) {
    total += std::max(v, 0.0);
    largest = std::max(largest, v);
  }
  if (total <= 0.0) throw Error("degenerate variable: zero total variance");
  const double zero_tol = 1e-12 * largest;
  double cumulative = 0.0;
  int k = 0;
  for (double v : eigenvalues) {
    if (v <= zero_tol) break;
    cumulative += v;
    ++k;
    if (cumulative / total >= threshold - 1e-12) return k;
  }
  return k;
}

int select_k_by_variance(const ChoiceDataset& train, std::string_view variable, double threshold) {
  const auto values = one_hot_eigenvalues(train, variable);
  return k_for_variance(values, threshold);
}

// ---------------------------------------------------------------------------

Matrix encode(const VariableEncoding& encoding, const ChoiceDataset& data) {
  const auto& data_map = data.category_map(encoding.variable);
  // Translate the dataset's category indices into the encoder's.
  std::vector<int> translate(data_map.size(), -1);
  for (std::size_t i = 0; i < data_map.size(); ++i) {
    if (auto idx = encoding.categories.find(data_map.labels[i])) translate[i] = *idx;
  }
  const auto codes = data.codes(encoding.variable);
  Matrix out(static_cast<Eigen::Index>(codes.size()), encoding.matrix.cols());
  std::size_t unseen = 0;
  for (std::size_t n = 0; n < codes.size(); ++n) {
    const int row = translate[static_cast<std::size_t>(codes[n])];
    if (row < 0) {
      out.row(static_cast<Eigen::Index>(n)).setZero();
      ++unseen;
    } else {
      out.row(static_cast<Eigen::Index>(n)) = encoding.matrix.row(row);
    }
  }
  if (unseen > 0) {
    spdlog::warn("encode {}: {} observation(s) with categories unknown to the encoder mapped to zero",
                 encoding.variable, unseen);
  }
  return out;
}

Matrix encode(const EncoderModel& model, const ChoiceDataset& data, std::string_view variable) {
  return encode(model.at(variable), data);
}

// ---------------------------------------------------------------------------

namespace {

json variable_to_json(const VariableEncoding& v) {
  json j;
  j["variable"] = v.variable;
  j["kind"] = encoder_kind_name(v.kind);
  j["categories"] = v.categories.labels;
  j["display"] = v.categories.display;
  j["rows"] = v.matrix.rows();
  j["cols"] = v.matrix.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(v.matrix.size()));
  for (Eigen::Index r = 0; r < v.matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < v.matrix.cols(); ++c) data.push_back(v.matrix(r, c));
  }
  j["matrix"] = data;
  json meta = json::object();
  if (v.base_category) meta["base_category"] = *v.base_category;
  if (!v.eigenvalues.empty()) meta["eigenvalues"] = v.eigenvalues;
  if (!v.center.empty()) meta["center"] = v.center;
  if (v.train_seed) meta["train_seed"] = *v.train_seed;
  j["metadata"] = meta;
  return j;
}

VariableEncoding variable_from_json(const json& j) {
  VariableEncoding v;
  v.variable = j.at("variable").get<std::string>();
  v.kind = parse_encoder_kind(j.at("kind").get<std::string>());
  v.categories.variable = v.variable;
  v.categories.labels = j.at("categories").get<std::vector<std::string>>();
  v.categories.display = j.value("display", v.categories.labels);
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("matrix").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw Error("encoder JSON: matrix size mismatch");
  v.matrix.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) v.matrix(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  const auto& meta = j.value("metadata", json::object());
  if (meta.contains("base_category")) v.base_category = meta["base_category"].get<std::string>();
  if (meta.contains("eigenvalues")) v.eigenvalues = meta["eigenvalues"].get<std::vector<double>>();
  if (meta.contains("center")) v.center = meta["center"].get<std::vector<double>>();
  if (meta.contains("train_seed")) v.train_seed = meta["train_seed"].get<std::uint64_t>();
  return v;
}

}  // namespace

std::string encoder_to_json(const EncoderModel& model) {
  json j;
  j["format"] = "travelemb-encoder";
  j["version"] = 1;
  j["variables"] = json::array();
  for (const auto& v : model.variables()) j["variables"].push_back(variable_to_json(v));
  return j.dump(1);
}

EncoderModel encoder_from_json(std::string_view text) {
  const json j = json::parse(text);
  EncoderModel model;
  for (const auto& v : j.at("variables")) model.add(variable_from_json(v));
  return model;
}

void save_encoder(const std::filesystem::path& path, const EncoderModel& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << encoder_to_json(model) << '\n';
}

EncoderModel load_encoder(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return encoder_from_json(ss.str());
}

}  // namespace travelemb
