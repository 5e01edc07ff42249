#include "travelemb/embed_train.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

namespace travelemb {

using json = nlohmann::json;

void EmbeddingNetConfig::validate() const {
  if (variables.empty()) throw Error("embedding config: no variables to encode");
  if (epochs < 1) throw Error("embedding config: epochs must be >= 1");
  if (repeats < 1) throw Error("embedding config: repeats must be >= 1");
  if (!(learning_rate >= 0.0)) throw Error("embedding config: learning rate must be >= 0");
  if (batch_size < 1) throw Error("embedding config: batch size must be >= 1");
  if (!(l2 >= 0.0)) throw Error("embedding config: l2 weight must be >= 0");
  for (const auto& v : variables) {
    if (v.k < 1) throw Error("embedding config: K must be >= 1 for " + v.name);
    if (!(v.reconstruction_weight >= 0.0)) throw Error("embedding config: negative reconstruction weight");
  }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

namespace {

// Calls f on corresponding blocks of every argument, in flatten() order.
template <typename F, typename... P>
void zip_blocks(F&& f, P&... ps) {
  auto& first = std::get<0>(std::tie(ps...));
  for (std::size_t v = 0; v < first.embeddings.size(); ++v) f(ps.embeddings[v]...);
  f(ps.choice_weights...);
  f(ps.covariate_weights...);
  f(ps.intercepts...);
  for (std::size_t v = 0; v < first.recon_weights.size(); ++v) f(ps.recon_weights[v]...);
  for (std::size_t v = 0; v < first.recon_bias.size(); ++v) f(ps.recon_bias[v]...);
}

}  // namespace

EmbeddingNetParams EmbeddingNetParams::zeros(std::span<const int> category_counts, std::span<const int> dims,
                                             int covariates) {
  if (category_counts.size() != dims.size()) throw Error("network shape: counts and dims differ in length");
  EmbeddingNetParams p;
  int total = 0;
  for (std::size_t v = 0; v < dims.size(); ++v) {
    p.embeddings.push_back(Matrix::Zero(dims[v], category_counts[v]));
    p.recon_weights.push_back(Matrix::Zero(category_counts[v], dims[v]));
    p.recon_bias.push_back(Vector::Zero(category_counts[v]));
    total += dims[v];
  }
  p.choice_weights = Matrix::Zero(kNumAlternatives, total);
  p.covariate_weights = Matrix::Zero(kNumAlternatives, covariates);
  p.intercepts = Vector::Zero(kNumAlternatives);
  return p;
}

std::size_t EmbeddingNetParams::parameter_count() const {
  std::size_t n = 0;
  auto self = *this;
  zip_blocks([&](auto& b) { n += static_cast<std::size_t>(b.size()); }, self);
  return n;
}

bool EmbeddingNetParams::all_finite() const {
  bool ok = true;
  auto self = *this;
  zip_blocks([&](auto& b) { ok = ok && b.allFinite(); }, self);
  return ok;
}

Vector EmbeddingNetParams::flatten() const {
  Vector flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index offset = 0;
  auto self = *this;
  zip_blocks(
      [&](auto& b) {
        flat.segment(offset, b.size()) = Eigen::Map<const Vector>(b.data(), b.size());
        offset += b.size();
      },
      self);
  return flat;
}

void EmbeddingNetParams::assign(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) throw Error("flat parameter size mismatch");
  Eigen::Index offset = 0;
  zip_blocks(
      [&](auto& b) {
        Eigen::Map<Vector>(b.data(), b.size()) = flat.segment(offset, b.size());
        offset += b.size();
      },
      *this);
}

EmbeddingNetParams initialize_params(std::span<const int> category_counts, std::span<const int> dims,
                                     int covariates, double scale, Rng& rng) {
  auto p = EmbeddingNetParams::zeros(category_counts, dims, covariates);
  zip_blocks(
      [&](auto& b) {
        for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-scale, scale);
      },
      p);
  return p;
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

NetData make_net_data(const ChoiceDataset& data, const EmbeddingNetConfig& config) {
  NetData out;
  for (const auto& v : config.variables) {
    const auto codes = data.codes(v.name);
    out.codes.emplace_back(codes.begin(), codes.end());
    out.category_counts.push_back(static_cast<int>(data.category_map(v.name).size()));
  }
  out.covariates.resize(static_cast<Eigen::Index>(config.covariates.size()), static_cast<Eigen::Index>(data.size()));
  for (std::size_t z = 0; z < config.covariates.size(); ++z) {
    const auto col = data.feature(config.covariates[z]);
    for (std::size_t n = 0; n < col.size(); ++n) {
      out.covariates(static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(n)) = col[n];
    }
  }
  out.choice.assign(data.choices().begin(), data.choices().end());
  out.availability = data.availability();
  return out;
}

LossWeights loss_weights(const EmbeddingNetConfig& config) {
  LossWeights w;
  for (const auto& v : config.variables) w.reconstruction.push_back(v.reconstruction_weight);
  w.l2 = config.l2;
  return w;
}

// ---------------------------------------------------------------------------
// Forward / loss / gradient
// ---------------------------------------------------------------------------

Vector masked_softmax(const Vector& logits, const Availability& availability) {
  double top = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < kNumAlternatives; ++c) {
    if (availability[static_cast<std::size_t>(c)]) top = std::max(top, logits(c));
  }
  if (top == -std::numeric_limits<double>::infinity()) throw Error("all alternatives unavailable");
  Vector p = Vector::Zero(kNumAlternatives);
  double sum = 0.0;
  for (int c = 0; c < kNumAlternatives; ++c) {
    if (!availability[static_cast<std::size_t>(c)]) continue;
    p(c) = std::exp(logits(c) - top);
    sum += p(c);
  }
  return p / sum;
}

namespace {

// Per-observation workspace so the hot loop does not allocate.
struct Workspace {
  Vector embedded;  // concatenated embeddings
  Vector logits;
  Vector probs;
  Vector d_embedded;
  std::vector<Vector> recon;  // per variable logits -> probs
};

Workspace make_workspace(const EmbeddingNetParams& params) {
  Workspace ws;
  ws.embedded.resize(params.total_dim());
  ws.d_embedded.resize(params.total_dim());
  ws.logits.resize(kNumAlternatives);
  ws.probs.resize(kNumAlternatives);
  for (const auto& r : params.recon_weights) ws.recon.emplace_back(r.rows());
  return ws;
}

double log_sum_exp(const Vector& x) {
  const double top = x.maxCoeff();
  return top + std::log((x.array() - top).exp().sum());
}

// Loss of one observation; accumulates scaled gradients when `grad` is set.
double observation_term(const EmbeddingNetParams& p, const NetData& data, std::size_t n,
                        const LossWeights& w, Workspace& ws, EmbeddingNetParams* grad, double scale) {
  const auto nv = p.embeddings.size();
  Eigen::Index offset = 0;
  for (std::size_t v = 0; v < nv; ++v) {
    const auto k = p.embeddings[v].rows();
    ws.embedded.segment(offset, k) = p.embeddings[v].col(data.codes[v][n]);
    offset += k;
  }
  const auto z = data.covariates.col(static_cast<Eigen::Index>(n));
  ws.logits.noalias() = p.choice_weights * ws.embedded;
  if (z.size() > 0) ws.logits.noalias() += p.covariate_weights * z;
  ws.logits += p.intercepts;

  const auto& av = data.availability[n];
  const int y = data.choice[n];
  double top = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < kNumAlternatives; ++c) {
    if (av[static_cast<std::size_t>(c)]) top = std::max(top, ws.logits(c));
  }
  double sum = 0.0;
  for (int c = 0; c < kNumAlternatives; ++c) {
    ws.probs(c) = av[static_cast<std::size_t>(c)] ? std::exp(ws.logits(c) - top) : 0.0;
    sum += ws.probs(c);
  }
  ws.probs /= sum;
  double value = -(ws.logits(y) - top - std::log(sum));

  if (grad) {
    ws.probs(y) -= 1.0;  // now dL/dlogits
    const Vector& g = ws.probs;
    grad->choice_weights.noalias() += scale * g * ws.embedded.transpose();
    if (z.size() > 0) grad->covariate_weights.noalias() += scale * g * z.transpose();
    grad->intercepts += scale * g;
    ws.d_embedded.noalias() = p.choice_weights.transpose() * g;
  }

  offset = 0;
  for (std::size_t v = 0; v < nv; ++v) {
    const auto k = p.embeddings[v].rows();
    const int x = data.codes[v][n];
    const double gamma = w.reconstruction[v];
    if (gamma != 0.0) {
      auto e = ws.embedded.segment(offset, k);
      Vector& r = ws.recon[v];
      r.noalias() = p.recon_weights[v] * e;
      r += p.recon_bias[v];
      const double lse = log_sum_exp(r);
      value += gamma * (lse - r(x));
      if (grad) {
        r = (r.array() - lse).exp();
        r(x) -= 1.0;
        r *= gamma;
        grad->recon_weights[v].noalias() += scale * r * e.transpose();
        grad->recon_bias[v] += scale * r;
        ws.d_embedded.segment(offset, k).noalias() += p.recon_weights[v].transpose() * r;
      }
    }
    if (grad) grad->embeddings[v].col(x) += scale * ws.d_embedded.segment(offset, k);
    offset += k;
  }
  return value;
}

double l2_penalty(const EmbeddingNetParams& p, double l2) {
  if (l2 == 0.0) return 0.0;
  double s = 0.0;
  for (const auto& W : p.embeddings) s += W.squaredNorm();
  return l2 * s;
}

}  // namespace

Vector forward(const EmbeddingNetParams& params, std::span<const int> codes, std::span<const double> covariates,
               const Availability& availability) {
  if (codes.size() != params.embeddings.size()) throw Error("forward: one category index per variable required");
  if (static_cast<Eigen::Index>(covariates.size()) != params.covariate_weights.cols()) {
    throw Error("forward: covariate count mismatch");
  }
  Vector logits = params.intercepts;
  Eigen::Index offset = 0;
  for (std::size_t v = 0; v < codes.size(); ++v) {
    const auto& W = params.embeddings[v];
    if (codes[v] < 0 || codes[v] >= W.cols()) throw Error("forward: category index out of range");
    logits.noalias() += params.choice_weights.middleCols(offset, W.rows()) * W.col(codes[v]);
    offset += W.rows();
  }
  if (!covariates.empty()) {
    logits.noalias() += params.covariate_weights *
                        Eigen::Map<const Vector>(covariates.data(), static_cast<Eigen::Index>(covariates.size()));
  }
  return masked_softmax(logits, availability);
}

double loss(const EmbeddingNetParams& params, const NetData& data, std::span<const std::size_t> rows,
            const LossWeights& weights) {
  if (rows.empty()) throw Error("loss: empty minibatch");
  auto ws = make_workspace(params);
  double total = 0.0;
  for (std::size_t n : rows) total += observation_term(params, data, n, weights, ws, nullptr, 0.0);
  return total / static_cast<double>(rows.size()) + l2_penalty(params, weights.l2);
}

double loss_and_gradient(const EmbeddingNetParams& params, const NetData& data, std::span<const std::size_t> rows,
                         const LossWeights& weights, EmbeddingNetParams& gradient) {
  if (rows.empty()) throw Error("loss: empty minibatch");
  std::vector<int> dims;
  for (const auto& W : params.embeddings) dims.push_back(static_cast<int>(W.rows()));
  gradient = EmbeddingNetParams::zeros(data.category_counts, dims, static_cast<int>(params.covariate_weights.cols()));
  auto ws = make_workspace(params);
  const double scale = 1.0 / static_cast<double>(rows.size());
  double total = 0.0;
  for (std::size_t n : rows) total += observation_term(params, data, n, weights, ws, &gradient, scale);
  if (weights.l2 != 0.0) {
    for (std::size_t v = 0; v < params.embeddings.size(); ++v) {
      gradient.embeddings[v] += 2.0 * weights.l2 * params.embeddings[v];
    }
  }
  return total * scale + l2_penalty(params, weights.l2);
}

EmbeddingNetParams gradient(const EmbeddingNetParams& params, const NetData& data, std::span<const std::size_t> rows,
                            const LossWeights& weights) {
  EmbeddingNetParams g;
  loss_and_gradient(params, data, rows, weights, g);
  return g;
}

double choice_log_likelihood(const EmbeddingNetParams& params, const NetData& data) {
  LossWeights none;
  none.reconstruction.assign(params.embeddings.size(), 0.0);
  auto ws = make_workspace(params);
  double ll = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) ll -= observation_term(params, data, n, none, ws, nullptr, 0.0);
  return ll;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

class Adam {
 public:
  Adam(const EmbeddingNetParams& shape, double lr, AdamSettings s) : lr_(lr), s_(s), m_(shape), v_(shape) {
    zip_blocks([](auto& a, auto& b) { a.setZero(); b.setZero(); }, m_, v_);
  }

  void step(EmbeddingNetParams& params, EmbeddingNetParams& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(s_.beta1, t_);
    const double c2 = 1.0 - std::pow(s_.beta2, t_);
    zip_blocks(
        [&](auto& p, auto& g, auto& m, auto& v) {
          m.array() = s_.beta1 * m.array() + (1.0 - s_.beta1) * g.array();
          v.array() = s_.beta2 * v.array() + (1.0 - s_.beta2) * g.array().square();
          p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + s_.epsilon);
        },
        params, grad, m_, v_);
  }

 private:
  double lr_;
  AdamSettings s_;
  EmbeddingNetParams m_;
  EmbeddingNetParams v_;
  int t_ = 0;
};

std::vector<int> config_dims(const EmbeddingNetConfig& config) {
  std::vector<int> dims;
  for (const auto& v : config.variables) dims.push_back(v.k);
  return dims;
}

}  // namespace

TrainRun train(const EmbeddingNetConfig& config, std::uint64_t seed, const NetData& train_data,
               const NetData& dev_data) {
  config.validate();
  if (train_data.size() == 0) throw Error("train: empty training split");
  if (train_data.category_counts != dev_data.category_counts) {
    throw Error("train: training and development splits use different category maps");
  }
  const auto dims = config_dims(config);
  Rng rng(seed);
  TrainRun run;
  run.seed = seed;
  run.params = initialize_params(train_data.category_counts, dims, static_cast<int>(train_data.covariates.rows()),
                                 config.init_scale, rng);
  const auto weights = loss_weights(config);
  Adam optimizer(run.params, config.learning_rate, config.adam);

  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::span<const std::size_t> all(order.data(), order.size());
  std::vector<std::size_t> shuffled = order;
  EmbeddingNetParams grad;
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(shuffled);
    for (std::size_t start = 0; start < shuffled.size(); start += batch) {
      const std::size_t len = std::min(batch, shuffled.size() - start);
      const double value = loss_and_gradient(run.params, train_data, {shuffled.data() + start, len}, weights, grad);
      if (!std::isfinite(value)) {
        throw DivergenceError("training diverged (non-finite loss) for seed " + std::to_string(seed), seed);
      }
      optimizer.step(run.params, grad);
    }
    const double epoch_loss = loss(run.params, train_data, all, weights);
    if (!std::isfinite(epoch_loss) || !run.params.all_finite()) {
      throw DivergenceError("training diverged (non-finite loss) for seed " + std::to_string(seed), seed);
    }
    run.train_loss.push_back(epoch_loss);
    run.dev_ll_per_epoch.push_back(dev_data.size() > 0 ? choice_log_likelihood(run.params, dev_data) : 0.0);
  }
  run.dev_log_likelihood = run.dev_ll_per_epoch.back();
  return run;
}

TrainRun train(const EmbeddingNetConfig& config, const ChoiceDataset& train_split, const ChoiceDataset& dev_split) {
  return train(config, config.seed, make_net_data(train_split, config), make_net_data(dev_split, config));
}

std::size_t argmax_dev(std::span<const double> dev_log_likelihoods) {
  if (dev_log_likelihoods.empty()) throw Error("argmax_dev: no runs");
  return static_cast<std::size_t>(std::max_element(dev_log_likelihoods.begin(), dev_log_likelihoods.end()) -
                                  dev_log_likelihoods.begin());
}

RepeatResult run_repeats(const EmbeddingNetConfig& config, const NetData& train_data, const NetData& dev_data) {
  config.validate();
  const auto repeats = static_cast<std::size_t>(config.repeats);
  std::vector<std::optional<TrainRun>> slots(repeats);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < repeats; i = next++) {
      const std::uint64_t seed = config.seed + i;
      try {
        slots[i] = train(config, seed, train_data, dev_data);
      } catch (const DivergenceError& e) {
        spdlog::warn("{}; run discarded", e.what());
      }
    }
  };
  unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, repeats));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  RepeatResult result;
  for (std::size_t i = 0; i < repeats; ++i) {
    if (slots[i]) {
      result.runs.push_back(std::move(*slots[i]));
    } else {
      result.diverged_seeds.push_back(config.seed + i);
    }
  }
  if (result.runs.empty()) throw Error("all embedding training runs diverged");
  std::vector<double> dev;
  for (const auto& r : result.runs) dev.push_back(r.dev_log_likelihood);
  result.best_index = argmax_dev(dev);
  return result;
}

RepeatResult run_repeats(const EmbeddingNetConfig& config, const ChoiceDataset& train_split,
                         const ChoiceDataset& dev_split) {
  return run_repeats(config, make_net_data(train_split, config), make_net_data(dev_split, config));
}

EncoderModel export_encoder(const TrainRun& run, const EmbeddingNetConfig& config, const ChoiceDataset& reference) {
  if (!run.params.all_finite()) throw Error("export: run has non-finite parameters");
  if (run.params.embeddings.size() != config.variables.size()) throw Error("export: config does not match run");
  EncoderModel model;
  for (std::size_t v = 0; v < config.variables.size(); ++v) {
    VariableEncoding enc;
    enc.variable = config.variables[v].name;
    enc.kind = EncoderKind::embedding;
    enc.categories = reference.category_map(enc.variable);
    enc.matrix = run.params.embeddings[v].transpose();
    enc.train_seed = run.seed;
    model.add(std::move(enc));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

json matrix_json(const Matrix& m) {
  std::vector<double> data;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw Error("network JSON: matrix size mismatch");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

}  // namespace

void save_trace_csv(const std::filesystem::path& path, const TrainRun& run) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch,train_loss,dev_log_likelihood\n";
  char buf[96];
  for (std::size_t e = 0; e < run.train_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.10f,%.6f\n", e + 1, run.train_loss[e], run.dev_ll_per_epoch[e]);
    out << buf;
  }
}

void save_network(const std::filesystem::path& path, const TrainRun& run, const EmbeddingNetConfig& config) {
  json j;
  j["format"] = "travelemb-network";
  j["version"] = 1;
  j["seed"] = run.seed;
  j["dev_log_likelihood"] = run.dev_log_likelihood;
  j["train_loss"] = run.train_loss;
  j["dev_ll_per_epoch"] = run.dev_ll_per_epoch;
  j["covariates"] = config.covariates;
  j["variables"] = json::array();
  for (std::size_t v = 0; v < config.variables.size(); ++v) {
    j["variables"].push_back({{"name", config.variables[v].name},
                              {"k", config.variables[v].k},
                              {"reconstruction_weight", config.variables[v].reconstruction_weight},
                              {"embedding", matrix_json(run.params.embeddings[v])},
                              {"recon_weights", matrix_json(run.params.recon_weights[v])},
                              {"recon_bias", matrix_json(run.params.recon_bias[v])}});
  }
  j["choice_weights"] = matrix_json(run.params.choice_weights);
  j["covariate_weights"] = matrix_json(run.params.covariate_weights);
  j["intercepts"] = matrix_json(run.params.intercepts);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

TrainRun load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing file: " + path.string());
  const json j = json::parse(in);
  TrainRun run;
  run.seed = j.at("seed").get<std::uint64_t>();
  run.dev_log_likelihood = j.at("dev_log_likelihood").get<double>();
  run.train_loss = j.at("train_loss").get<std::vector<double>>();
  run.dev_ll_per_epoch = j.at("dev_ll_per_epoch").get<std::vector<double>>();
  for (const auto& v : j.at("variables")) {
    run.params.embeddings.push_back(matrix_from(v.at("embedding")));
    run.params.recon_weights.push_back(matrix_from(v.at("recon_weights")));
    run.params.recon_bias.push_back(matrix_from(v.at("recon_bias")));
  }
  run.params.choice_weights = matrix_from(j.at("choice_weights"));
  run.params.covariate_weights = matrix_from(j.at("covariate_weights"));
  run.params.intercepts = matrix_from(j.at("intercepts"));
  return run;
}

}  // namespace travelemb
