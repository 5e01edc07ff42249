#include "synthetic.hpp"

#include "travelemb/embed_train.hpp"
#include "travelemb/encoders.hpp"
#include "travelemb/mds.hpp"
#include "travelemb/mnl.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

using namespace travelemb;

namespace {

const ChoiceDataset& data() {
  static const ChoiceDataset d = [] {
    testing::SyntheticOptions opts;
    opts.respondents = 700;
    opts.cantons = 10;
    return testing::synthetic_dataset(opts);
  }();
  return d;
}

void BM_EstimateBase(benchmark::State& state) {
  const auto design = assemble_design(data(), base14_spec(), EncoderModel{});
  for (auto _ : state) benchmark::DoNotOptimize(estimate(design));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * design.rows()));
}
BENCHMARK(BM_EstimateBase)->Unit(benchmark::kMillisecond);

void BM_EstimateDummyOD(benchmark::State& state) {
  auto spec = base14_spec();
  spec.encoded = swissmetro_encoded_terms({"OD"});
  EncoderModel enc;
  enc.add(fit_dummy(data().category_map("OD"), most_frequent_category(data(), "OD")));
  const auto full = assemble_design(data(), spec, enc);
  const auto design = drop_columns(full, rank_deficient_columns(full));
  for (auto _ : state) benchmark::DoNotOptimize(estimate(design));
  state.counters["parameters"] = design.k();
}
BENCHMARK(BM_EstimateDummyOD)->Unit(benchmark::kMillisecond);

void BM_TrainingEpoch(benchmark::State& state) {
  EmbeddingNetConfig config;
  config.variables = {{"OD", 3, 0.01}, {"TICKET", 5, 0.01}, {"WHO", 1, 0.01}, {"AGE", 3, 0.01}, {"INCOME", 3, 0.01}};
  config.covariates = {"TRAIN_TT", "SM_TT", "CAR_TT", "TRAIN_COST", "SM_COST", "CAR_COST"};
  config.epochs = 1;
  const auto net = make_net_data(data(), config);
  for (auto _ : state) benchmark::DoNotOptimize(train(config, 1, net, net));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * net.size()));
}
BENCHMARK(BM_TrainingEpoch)->Unit(benchmark::kMillisecond);

void BM_LossAndGradient(benchmark::State& state) {
  EmbeddingNetConfig config;
  config.variables = {{"OD", 3, 0.01}, {"TICKET", 5, 0.01}};
  const auto net = make_net_data(data(), config);
  Rng rng(1);
  const std::vector<int> dims{3, 5};
  const auto params = initialize_params(net.category_counts, dims, 0, 0.05, rng);
  std::vector<std::size_t> rows(static_cast<std::size_t>(state.range(0)));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  EmbeddingNetParams grad;
  const auto weights = loss_weights(config);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(params, net, rows, weights, grad));
}
BENCHMARK(BM_LossAndGradient)->Arg(128)->Arg(1024);

void BM_FitPca(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(fit_pca(data(), "OD", 3));
}
BENCHMARK(BM_FitPca);

void BM_ClassicalMds(benchmark::State& state) {
  Rng rng(2);
  Matrix points(state.range(0), 3);
  for (Eigen::Index i = 0; i < points.size(); ++i) points.data()[i] = rng.uniform(-1.0, 1.0);
  const Matrix d = pairwise_distances(points);
  const std::vector<std::string> labels(static_cast<std::size_t>(state.range(0)), "c");
  for (auto _ : state) benchmark::DoNotOptimize(classical_mds(d, labels));
}
BENCHMARK(BM_ClassicalMds)->Arg(26)->Arg(108)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
