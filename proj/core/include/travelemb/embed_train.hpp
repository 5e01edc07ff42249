#pragma once

#include "travelemb/common.hpp"
#include "travelemb/dataset.hpp"
#include "travelemb/encoders.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace travelemb {

struct EmbeddingVariableConfig {
  std::string name;
  int k = 1;
  /// Weight of this variable's one-hot reconstruction loss.
  double reconstruction_weight = 0.01;
};

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct EmbeddingNetConfig {
  std::vector<EmbeddingVariableConfig> variables;
  /// Numeric features fed straight into the choice softmax.
  std::vector<std::string> covariates;
  int epochs = 80;
  int repeats = 30;
  std::uint64_t seed = 0;
  double learning_rate = 1e-2;
  int batch_size = 128;
  double l2 = 1e-4;
  double init_scale = 0.05;
  AdamSettings adam;
  /// Worker threads for run_repeats; 0 picks the hardware concurrency.
  unsigned threads = 0;

  void validate() const;
};

/// Parameters of the joint network. C is kNumAlternatives.
struct EmbeddingNetParams {
  std::vector<Matrix> embeddings;     // W_v: K_v x D_v
  Matrix choice_weights;              // C x sum(K_v), blocks in variable order
  Matrix covariate_weights;           // C x Z
  Vector intercepts;                  // C
  std::vector<Matrix> recon_weights;  // R_v: D_v x K_v
  std::vector<Vector> recon_bias;     // D_v

  static EmbeddingNetParams zeros(std::span<const int> category_counts, std::span<const int> dims,
                                  int covariates);

  std::size_t variable_count() const { return embeddings.size(); }
  int total_dim() const { return static_cast<int>(choice_weights.cols()); }
  std::size_t parameter_count() const;
  bool all_finite() const;

  /// Flat view in a fixed member order, for optimisers and finite differences.
  Vector flatten() const;
  void assign(const Vector& flat);
};

/// Training inputs in network form: category indices, covariates (Z x N,
/// one column per observation), choices and availability.
struct NetData {
  std::vector<std::vector<int>> codes;  // per variable
  std::vector<int> category_counts;     // D_v
  Matrix covariates;
  std::vector<int> choice;
  std::vector<Availability> availability;

  std::size_t size() const { return choice.size(); }
};

NetData make_net_data(const ChoiceDataset& data, const EmbeddingNetConfig& config);

struct LossWeights {
  std::vector<double> reconstruction;  // gamma_v
  double l2 = 0.0;                     // lambda
};

LossWeights loss_weights(const EmbeddingNetConfig& config);

/// Choice probabilities for one observation. Unavailable alternatives get
/// exactly zero; logits are max-shifted before exponentiation.
Vector forward(const EmbeddingNetParams& params, std::span<const int> codes,
               std::span<const double> covariates, const Availability& availability);

/// Masked softmax on raw logits (exposed for property tests).
Vector masked_softmax(const Vector& logits, const Availability& availability);

/// Mean over `rows` of choice cross-entropy plus weighted reconstruction
/// cross-entropies, plus l2 * sum ||W_v||_F^2.
double loss(const EmbeddingNetParams& params, const NetData& data, std::span<const std::size_t> rows,
            const LossWeights& weights);

/// Analytic gradient of `loss`; returns the loss value alongside.
double loss_and_gradient(const EmbeddingNetParams& params, const NetData& data,
                         std::span<const std::size_t> rows, const LossWeights& weights,
                         EmbeddingNetParams& gradient);

EmbeddingNetParams gradient(const EmbeddingNetParams& params, const NetData& data,
                            std::span<const std::size_t> rows, const LossWeights& weights);

/// Sum of log-probabilities of the chosen alternatives under the choice head.
double choice_log_likelihood(const EmbeddingNetParams& params, const NetData& data);

/// Uniform(-scale, scale) initialisation from a seeded stream.
EmbeddingNetParams initialize_params(std::span<const int> category_counts, std::span<const int> dims,
                                     int covariates, double scale, Rng& rng);

struct TrainRun {
  EmbeddingNetParams params;
  std::vector<double> train_loss;        // full training loss after each epoch
  std::vector<double> dev_ll_per_epoch;  // choice-head dev log-likelihood after each epoch
  double dev_log_likelihood = 0.0;
  std::uint64_t seed = 0;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::uint64_t seed) : Error(what), seed_(seed) {}
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

/// One training run with `seed`. Throws DivergenceError on a non-finite loss.
TrainRun train(const EmbeddingNetConfig& config, std::uint64_t seed, const NetData& train_data,
               const NetData& dev_data);
TrainRun train(const EmbeddingNetConfig& config, const ChoiceDataset& train_split,
               const ChoiceDataset& dev_split);

struct RepeatResult {
  std::vector<TrainRun> runs;  // successful runs in seed order
  std::size_t best_index = 0;  // argmax dev log-likelihood
  std::vector<std::uint64_t> diverged_seeds;

  const TrainRun& best() const { return runs.at(best_index); }
};

/// Runs seeds seed, seed+1, ... (config.repeats of them), possibly in
/// parallel. Diverged runs are logged and excluded. Throws if all diverge.
RepeatResult run_repeats(const EmbeddingNetConfig& config, const ChoiceDataset& train_split,
                         const ChoiceDataset& dev_split);
RepeatResult run_repeats(const EmbeddingNetConfig& config, const NetData& train_data,
                         const NetData& dev_data);

/// Index of the maximum (first on ties).
std::size_t argmax_dev(std::span<const double> dev_log_likelihoods);

/// Embedding encoder per variable: category d maps to column d of W_v.
EncoderModel export_encoder(const TrainRun& run, const EmbeddingNetConfig& config,
                            const ChoiceDataset& reference);

void save_trace_csv(const std::filesystem::path& path, const TrainRun& run);
void save_network(const std::filesystem::path& path, const TrainRun& run, const EmbeddingNetConfig& config);
TrainRun load_network(const std::filesystem::path& path);

}  // namespace travelemb
