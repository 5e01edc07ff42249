#include "travelemb/harness.hpp"

#include "travelemb/config.hpp"
#include "travelemb/report.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace travelemb {

using json = nlohmann::json;

namespace {

constexpr std::array<ModelKind, 5> kAllModels{ModelKind::original, ModelKind::dummy_full, ModelKind::dummy_reduced,
                                              ModelKind::pca, ModelKind::embeddings};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::original: return "original";
    case ModelKind::dummy_full: return "dummy_full";
    case ModelKind::dummy_reduced: return "dummy_reduced";
    case ModelKind::pca: return "pca";
    case ModelKind::embeddings: return "embeddings";
  }
  return "?";
}

ModelKind parse_model(std::string_view text) {
  for (auto m : kAllModels)
    if (model_name(m) == text) return m;
  throw Error("unknown model: " + std::string(text));
}

std::string_view scenario_name(SweepScenario scenario) {
  return scenario == SweepScenario::light ? "light" : "bigdata";
}

SweepScenario parse_scenario(std::string_view text) {
  if (text == "light") return SweepScenario::light;
  if (text == "bigdata") return SweepScenario::bigdata;
  throw Error("unknown sweep scenario: " + std::string(text));
}

void ExperimentConfig::validate() const {
  if (roster.empty()) throw Error("experiment config: roster is empty");
  split.validate();
  if (k_values.empty()) throw Error("experiment config: no encoded variables");
  for (std::size_t i = 0; i < k_values.size(); ++i) {
    if (k_values[i].second < 1) throw Error("experiment config: K must be >= 1 for " + k_values[i].first);
    for (std::size_t j = 0; j < i; ++j)
      if (k_values[j].first == k_values[i].first) throw Error("experiment config: duplicate variable " + k_values[i].first);
  }
  for (double f : sweep.fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw Error("experiment config: sweep fractions must lie in (0, 1]");
  }
  for (std::size_t i = 1; i < sweep.fractions.size(); ++i) {
    if (!(sweep.fractions[i] > sweep.fractions[i - 1])) {
      throw Error("experiment config: sweep fractions must be strictly increasing");
    }
  }
  network_config(*this).validate();
}

std::vector<std::string> default_covariates() {
  return {"TRAIN_TT", "SM_TT",  "CAR_TT",       "TRAIN_COST",  "SM_COST",   "CAR_COST",   "TRAIN_HE",
          "SM_HE",    "SM_SEATS", "SURVEY_TRAIN", "FIRST_FALSE", "LUGGAGE_1", "LUGGAGE_GT1"};
}

EmbeddingNetConfig default_network_settings() {
  EmbeddingNetConfig net;
  net.covariates = default_covariates();
  return net;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  return fnv1a64(std::to_string(seed) + ":" + std::string(purpose));
}

EmbeddingNetConfig network_config(const ExperimentConfig& config) {
  EmbeddingNetConfig net = config.embeddings;
  const double gamma = net.variables.empty() ? EmbeddingVariableConfig{}.reconstruction_weight
                                             : net.variables.front().reconstruction_weight;
  std::vector<EmbeddingVariableConfig> vars;
  for (const auto& [name, k] : config.k_values) {
    EmbeddingVariableConfig v{name, k, gamma};
    for (const auto& given : net.variables)
      if (given.name == name) v.reconstruction_weight = given.reconstruction_weight;
    vars.push_back(v);
  }
  net.variables = std::move(vars);
  net.seed = derive_seed(config.seed, "embeddings");
  return net;
}

DataSplit load_split(const std::filesystem::path& path, const SplitSpec& spec) {
  if (std::filesystem::is_directory(path)) {
    auto prepared = load_dataset(path);
    if (prepared.split) {
      DataSplit out;
      out.indices = *prepared.split;
      out.train = prepared.data.subset(out.indices.train);
      out.dev = prepared.data.subset(out.indices.dev);
      out.test = prepared.data.subset(out.indices.test);
      return out;
    }
    return split(prepared.data, spec);
  }
  return split(filter_and_derive(load_raw(path)), spec);
}

VariableEncoding make_encoding(EncoderKind kind, const ChoiceDataset& train, const std::string& variable, int k) {
  switch (kind) {
    case EncoderKind::dummy: return fit_dummy(train.category_map(variable), most_frequent_category(train, variable));
    case EncoderKind::pca: return fit_pca(train, variable, k);
    case EncoderKind::embedding: break;
  }
  throw Error("embedding encoders come from a trained network");
}

bool ComparisonResult::any_failed() const {
  return std::any_of(rows.begin(), rows.end(), [](const ComparisonRow& r) { return !r.ok; });
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

namespace {

struct Fitted {
  EstimationResult result;
  FitMetrics test;
  std::vector<std::string> dropped;
};

Fitted fit_model(const UtilitySpec& spec, const EncoderModel& encoders, const ChoiceDataset& train,
                 const ChoiceDataset& test, const EstimateOptions& options, bool drop_deficient) {
  Design design = assemble_design(train, spec, encoders);
  Fitted out;
  if (drop_deficient) {
    out.dropped = rank_deficient_columns(design);
    if (!out.dropped.empty()) {
      spdlog::warn("dropping {} rank-deficient column(s)", out.dropped.size());
      design = drop_columns(design, out.dropped);
    }
  }
  out.result = estimate(design, options);
  Design test_design = assemble_design(test, spec, encoders);
  if (!out.dropped.empty()) test_design = drop_columns(test_design, out.dropped);
  out.test = evaluate(out.result, test_design);
  return out;
}

UtilitySpec spec_with(const std::vector<std::string>& variables) {
  UtilitySpec spec = base14_spec();
  spec.encoded = swissmetro_encoded_terms(variables);
  return spec;
}

std::vector<std::string> variable_names(const std::vector<std::pair<std::string, int>>& k_values) {
  std::vector<std::string> out;
  for (const auto& kv : k_values) out.push_back(kv.first);
  return out;
}

int k_of(const std::vector<std::pair<std::string, int>>& k_values, const std::string& variable) {
  for (const auto& [name, k] : k_values)
    if (name == variable) return k;
  throw Error("no K configured for " + variable);
}

ComparisonRow row_from(std::string model, const Fitted& f) {
  ComparisonRow row;
  row.model = std::move(model);
  row.ok = true;
  row.parameters = f.result.k();
  row.train = f.result.train;
  row.test = f.test;
  row.dropped_columns = f.dropped;
  return row;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

ComparisonResult run_comparison(const ExperimentConfig& config, const DataSplit& data) {
  config.validate();
  ComparisonResult out;
  const auto variables = variable_names(config.k_values);
  std::vector<std::string> reduced;
  for (const auto& v : variables)
    if (v != "OD") reduced.push_back(v);

  auto attempt = [&](ModelKind kind, auto&& body) {
    const std::string name(model_name(kind));
    Stopwatch clock;
    try {
      body(name);
    } catch (const std::exception& e) {
      spdlog::error("model {} failed: {}", name, e.what());
      ComparisonRow row;
      row.model = name;
      row.error = e.what();
      out.rows.push_back(row);
    }
    out.timings[name] = clock.seconds();
  };

  auto dummy_model = [&](const std::vector<std::string>& vars) {
    EncoderModel enc;
    for (const auto& v : vars) enc.add(make_encoding(EncoderKind::dummy, data.train, v, 0));
    return enc;
  };

  for (ModelKind kind : config.roster) {
    switch (kind) {
      case ModelKind::original:
        attempt(kind, [&](const std::string& name) {
          auto f = fit_model(base14_spec(), {}, data.train, data.test, config.estimation, false);
          out.rows.push_back(row_from(name, f));
          out.estimates[name] = std::move(f.result);
        });
        break;
      case ModelKind::dummy_full:
        attempt(kind, [&](const std::string& name) {
          auto enc = dummy_model(variables);
          auto f = fit_model(spec_with(variables), enc, data.train, data.test, config.estimation, true);
          out.rows.push_back(row_from(name, f));
          out.estimates[name] = std::move(f.result);
          out.encoders[name] = std::move(enc);
        });
        break;
      case ModelKind::dummy_reduced:
        attempt(kind, [&](const std::string& name) {
          auto enc = dummy_model(reduced);
          auto f = fit_model(spec_with(reduced), enc, data.train, data.test, config.estimation, true);
          out.rows.push_back(row_from(name, f));
          out.estimates[name] = std::move(f.result);
          out.encoders[name] = std::move(enc);
        });
        break;
      case ModelKind::pca:
        attempt(kind, [&](const std::string& name) {
          EncoderModel enc;
          for (const auto& [v, k] : config.k_values) enc.add(make_encoding(EncoderKind::pca, data.train, v, k));
          auto f = fit_model(spec_with(variables), enc, data.train, data.test, config.estimation, false);
          out.rows.push_back(row_from(name, f));
          out.estimates[name] = std::move(f.result);
          out.encoders[name] = std::move(enc);
        });
        break;
      case ModelKind::embeddings:
        attempt(kind, [&](const std::string& name) {
          const auto net = network_config(config);
          spdlog::info("training {} embedding networks ({} epochs each)", net.repeats, net.epochs);
          Stopwatch train_clock;
          auto repeats = run_repeats(net, data.train, data.dev);
          out.timings["embedding_training"] = train_clock.seconds();

          const auto spec = spec_with(variables);
          std::vector<double> train_ll;
          std::vector<double> test_ll;
          std::optional<Fitted> best;
          for (std::size_t i = 0; i < repeats.runs.size(); ++i) {
            const auto& run = repeats.runs[i];
            RepeatSummary summary{run.seed, run.dev_log_likelihood, 0.0, 0.0, false};
            try {
              auto enc = export_encoder(run, net, data.train);
              auto f = fit_model(spec, enc, data.train, data.test, config.estimation, false);
              summary.train_ll = f.result.train.log_likelihood;
              summary.test_ll = f.test.log_likelihood;
              summary.ok = true;
              train_ll.push_back(summary.train_ll);
              test_ll.push_back(summary.test_ll);
              if (i == repeats.best_index) {
                best = std::move(f);
                out.encoders[name] = std::move(enc);
              }
            } catch (const Error& e) {
              spdlog::warn("embedding run with seed {} could not be estimated: {}", run.seed, e.what());
            }
            out.repeats.push_back(summary);
          }
          if (!best) throw Error("the best embedding run (by development log-likelihood) failed to estimate");

          ComparisonRow best_row = row_from(name, *best);
          best_row.repeats = static_cast<int>(repeats.runs.size());
          best_row.diverged = static_cast<int>(repeats.diverged_seeds.size());
          out.rows.push_back(best_row);

          ComparisonRow mean_row;
          mean_row.model = name + "_mean";
          mean_row.ok = true;
          mean_row.parameters = best->result.k();
          mean_row.train = fit_metrics(mean_of(train_ll), best->result.train.null_log_likelihood, mean_row.parameters,
                                       best->result.train.observations);
          mean_row.test = fit_metrics(mean_of(test_ll), best->test.null_log_likelihood, mean_row.parameters,
                                      best->test.observations);
          mean_row.test_ll_std = sample_std(test_ll);
          mean_row.repeats = static_cast<int>(test_ll.size());
          mean_row.diverged = best_row.diverged;
          out.rows.push_back(mean_row);

          out.projected = project_all(best->result, out.encoders[name]);
          for (const auto& ve : out.encoders[name].variables()) {
            if (ve.category_count() < 3) continue;
            out.layouts.push_back(classical_mds(pairwise_distances(ve.matrix), ve.categories.display, 2));
          }
          out.estimates[name] = std::move(best->result);
          out.best_run = repeats.best();
        });
        break;
    }
  }
  return out;
}

ComparisonResult run_comparison(const ExperimentConfig& config) {
  SplitSpec spec = config.split;
  spec.seed = derive_seed(config.seed, "split");
  return run_comparison(config, load_split(config.dataset, spec));
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

namespace {

ChoiceDataset concatenate(const ChoiceDataset& a, const ChoiceDataset& b) {
  DatasetColumns cols = a.columns();
  const auto& other = b.columns();
  for (std::size_t f = 0; f < cols.features.size(); ++f)
    cols.features[f].insert(cols.features[f].end(), other.features[f].begin(), other.features[f].end());
  for (std::size_t v = 0; v < cols.category_codes.size(); ++v)
    cols.category_codes[v].insert(cols.category_codes[v].end(), other.category_codes[v].begin(),
                                  other.category_codes[v].end());
  cols.choice.insert(cols.choice.end(), other.choice.begin(), other.choice.end());
  cols.availability.insert(cols.availability.end(), other.availability.begin(), other.availability.end());
  cols.observation_id.insert(cols.observation_id.end(), other.observation_id.begin(), other.observation_id.end());
  cols.respondent_id.insert(cols.respondent_id.end(), other.respondent_id.begin(), other.respondent_id.end());
  return ChoiceDataset(std::move(cols));
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config, const DataSplit& data, SweepScenario scenario) {
  config.validate();
  Stopwatch clock;
  SweepResult out;
  out.scenario = scenario;

  const ChoiceDataset pool = concatenate(data.train, data.dev);
  const auto variables = variable_names(config.k_values);
  std::vector<std::string> source;
  for (const std::string v : {"OD", "TICKET"}) {
    if (scenario == SweepScenario::bigdata && v == "TICKET") continue;
    if (std::find(variables.begin(), variables.end(), v) != variables.end()) source.push_back(v);
  }
  if (source.empty()) throw Error("sweep: none of the scenario's variables are in the encoding set");
  std::vector<std::string> reduced;
  for (const auto& v : variables)
    if (v != "OD") reduced.push_back(v);

  // Embeddings see only the cheap variables and the choice, over all non-test rows.
  EmbeddingNetConfig net = network_config(config);
  net.variables.erase(std::remove_if(net.variables.begin(), net.variables.end(),
                                     [&](const EmbeddingVariableConfig& v) {
                                       return std::find(source.begin(), source.end(), v.name) == source.end();
                                     }),
                      net.variables.end());
  net.covariates.clear();
  if (config.sweep.repeats > 0) net.repeats = config.sweep.repeats;
  net.seed = derive_seed(config.seed, std::string("sweep-embeddings-") + std::string(scenario_name(scenario)));
  spdlog::info("sweep {}: training {} embedding networks on {} rows", scenario_name(scenario), net.repeats,
               pool.size());
  const auto pool_net = make_net_data(pool, net);
  const auto repeats = run_repeats(net, pool_net, pool_net);
  const auto embedded = export_encoder(repeats.best(), net, pool);

  EncoderModel pca;
  for (const auto& v : source) pca.add(make_encoding(EncoderKind::pca, pool, v, k_of(config.k_values, v)));

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config.seed, "sweep-fractions"));
  rng.shuffle(order);

  for (double fraction : config.sweep.fractions) {
    const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size())));
    std::vector<std::size_t> rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(rows.begin(), rows.end());
    const ChoiceDataset detailed = pool.subset(rows);
    SweepPoint point;
    point.fraction = fraction;
    point.observations = detailed.size();

    auto record = [&](ModelKind kind, const UtilitySpec& spec, auto&& build_encoders) {
      const std::string name(model_name(kind));
      point.test_r2[name] = std::nullopt;
      try {
        const EncoderModel enc = build_encoders();
        auto f = fit_model(spec, enc, detailed, data.test, config.estimation, false);
        const auto& d = f.result.diagnostics;
        if (d.converged && !d.hessian_singular && std::isfinite(f.test.r2) && f.test.r2 >= 0.0) {
          point.test_r2[name] = f.test.r2;
        }
      } catch (const Error& e) {
        spdlog::debug("sweep {} at {}: {} not estimable: {}", scenario_name(scenario), fraction, name, e.what());
      }
    };
    auto dummies = [&](const std::vector<std::string>& vars, EncoderModel base) {
      for (const auto& v : vars)
        if (!base.contains(v)) base.add(make_encoding(EncoderKind::dummy, detailed, v, 0));
      return base;
    };

    for (ModelKind kind : config.roster) {
      switch (kind) {
        case ModelKind::original: record(kind, base14_spec(), [] { return EncoderModel{}; }); break;
        case ModelKind::dummy_full:
          record(kind, spec_with(variables), [&] { return dummies(variables, {}); });
          break;
        case ModelKind::dummy_reduced:
          record(kind, spec_with(reduced), [&] { return dummies(reduced, {}); });
          break;
        case ModelKind::pca: record(kind, spec_with(variables), [&] { return dummies(variables, pca); }); break;
        case ModelKind::embeddings:
          record(kind, spec_with(variables), [&] { return dummies(variables, embedded); });
          break;
      }
    }
    out.points.push_back(std::move(point));
  }
  out.seconds = clock.seconds();
  return out;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

namespace {

Table summary_table(const std::vector<ComparisonRow>& rows) {
  Table t;
  t.header = {"model",     "params",   "train LL", "train R2", "train Rbar2", "train AIC", "test LL",
              "test R2",   "test Rbar2", "test AIC", "test LL std", "repeats",   "status"};
  for (const auto& r : rows) {
    if (!r.ok) {
      t.rows.push_back({r.model, "", "", "", "", "", "", "", "", "", "", "", "failed: " + r.error});
      continue;
    }
    std::string status = "ok";
    if (!r.dropped_columns.empty()) status = "dropped " + std::to_string(r.dropped_columns.size()) + " columns";
    if (r.diverged > 0) status = std::to_string(r.diverged) + " diverged";
    t.rows.push_back({r.model, std::to_string(r.parameters), fixed(r.train.log_likelihood, 1), fixed(r.train.r2, 3),
                      fixed(r.train.rbar2, 3), fixed(r.train.aic, 1), fixed(r.test.log_likelihood, 1),
                      fixed(r.test.r2, 3), fixed(r.test.rbar2, 3), fixed(r.test.aic, 1),
                      r.test_ll_std ? fixed(*r.test_ll_std, 1) : "", r.repeats ? std::to_string(r.repeats) : "",
                      status});
  }
  return t;
}

std::vector<std::string> sweep_models(const SweepResult& sweep) {
  std::vector<std::string> names;
  for (auto m : kAllModels) {
    const std::string name(model_name(m));
    if (!sweep.points.empty() && sweep.points.front().test_r2.count(name)) names.push_back(name);
  }
  return names;
}

}  // namespace

std::string summary_table_md(const std::vector<ComparisonRow>& rows) { return summary_table(rows).markdown(); }
std::string summary_table_csv(const std::vector<ComparisonRow>& rows) { return summary_table(rows).csv(); }

std::string sweep_csv(const SweepResult& sweep) {
  Table t;
  t.header = {"fraction", "observations"};
  const auto models = sweep_models(sweep);
  for (const auto& m : models) t.header.push_back(m);
  for (const auto& p : sweep.points) {
    std::vector<std::string> row{fixed(p.fraction, 3), std::to_string(p.observations)};
    for (const auto& m : models) {
      const auto& v = p.test_r2.at(m);
      row.push_back(v ? fixed(*v, 6) : "");
    }
    t.rows.push_back(std::move(row));
  }
  return t.csv();
}

std::string sweep_svg(const SweepResult& sweep) {
  constexpr double w = 720, h = 480, left = 70, right = 170, top = 40, bottom = 60;
  const auto models = sweep_models(sweep);
  double lo = 0.0;
  double hi = 0.1;
  for (const auto& p : sweep.points)
    for (const auto& m : models)
      if (const auto& v = p.test_r2.at(m)) hi = std::max(hi, *v);
  hi = std::ceil(hi * 20.0) / 20.0;
  auto px = [&](double f) { return left + f * (w - left - right); };
  auto py = [&](double r) { return h - bottom - (r - lo) / (hi - lo) * (h - top - bottom); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" viewBox=\"0 0 720 480\">\n";
  svg += "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fixed(w / 2, 1) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">"
         "Test pseudo R2 by share of detailed survey (" + std::string(scenario_name(sweep.scenario)) + ")</text>\n";
  svg += "<line x1=\"" + fixed(left, 1) + "\" y1=\"" + fixed(py(lo), 1) + "\" x2=\"" + fixed(px(1.0), 1) + "\" y2=\"" +
         fixed(py(lo), 1) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fixed(left, 1) + "\" y1=\"" + fixed(py(lo), 1) + "\" x2=\"" + fixed(left, 1) + "\" y2=\"" +
         fixed(py(hi), 1) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 10; ++i) {
    const double f = i / 10.0;
    svg += "<text x=\"" + fixed(px(f), 1) + "\" y=\"" + fixed(h - bottom + 18, 1) +
           "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" + fixed(f, 1) + "</text>\n";
  }
  for (double r = lo; r <= hi + 1e-9; r += 0.05) {
    svg += "<text x=\"" + fixed(left - 8, 1) + "\" y=\"" + fixed(py(r) + 3, 1) +
           "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" + fixed(r, 2) + "</text>\n";
  }
  svg += "<text x=\"" + fixed((left + px(1.0)) / 2, 1) + "\" y=\"" + fixed(h - 18, 1) +
         "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">share of detailed survey</text>\n";

  for (std::size_t m = 0; m < models.size(); ++m) {
    const std::string color = colors[m % 5];
    std::string segment;
    auto flush = [&] {
      if (!segment.empty()) svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"" + segment + "\"/>\n";
      segment.clear();
    };
    for (const auto& p : sweep.points) {
      const auto& v = p.test_r2.at(models[m]);
      if (!v) {
        flush();
        continue;
      }
      if (!segment.empty()) segment += ' ';
      segment += fixed(px(p.fraction), 1) + "," + fixed(py(*v), 1);
      svg += "<circle cx=\"" + fixed(px(p.fraction), 1) + "\" cy=\"" + fixed(py(*v), 1) + "\" r=\"3\" fill=\"" + color +
             "\"/>\n";
    }
    flush();
    const double ly = top + 20.0 * static_cast<double>(m);
    svg += "<line x1=\"" + fixed(w - right + 15, 1) + "\" y1=\"" + fixed(ly, 1) + "\" x2=\"" + fixed(w - right + 40, 1) +
           "\" y2=\"" + fixed(ly, 1) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fixed(w - right + 45, 1) + "\" y=\"" + fixed(ly + 4, 1) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + models[m] + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

ReportFiles export_report(const ExperimentConfig& config, const ComparisonResult* comparison,
                          const std::vector<SweepResult>& sweeps, const std::filesystem::path& directory) {
  ReportFiles files;
  auto put = [&](const std::filesystem::path& rel, std::string_view text) {
    write_text(directory / rel, text);
    files.written.push_back(rel);
  };
  json manifest;
  manifest["config_hash"] = config_hash(config);
  manifest["seed"] = config.seed;
  manifest["split_seed"] = derive_seed(config.seed, "split");
  manifest["embedding_seed"] = network_config(config).seed;
  manifest["config"] = json::parse(experiment_config_json(config));
  json omitted = json::array();
  json timings = json::object();

  if (comparison) {
    put("summary.md", summary_table_md(comparison->rows));
    put("summary.csv", summary_table_csv(comparison->rows));
    for (const auto& row : comparison->rows) {
      auto it = comparison->estimates.find(row.model);
      if (it == comparison->estimates.end()) continue;
      put("coefficients/" + row.model + ".md", coefficient_table_md(it->second));
      put("coefficients/" + row.model + ".csv", coefficient_table_csv(it->second));
      put("coefficients/" + row.model + ".json", result_to_json(it->second, row.test));
    }
    for (const auto& [name, enc] : comparison->encoders) put("encoders/" + name + ".json", encoder_to_json(enc));
    if (!comparison->repeats.empty()) {
      Table t;
      t.header = {"seed", "dev_network_ll", "train_ll", "test_ll", "estimated"};
      for (const auto& r : comparison->repeats) {
        t.rows.push_back({std::to_string(r.seed), fixed(r.dev_network_ll, 4), fixed(r.train_ll, 4),
                          fixed(r.test_ll, 4), r.ok ? "yes" : "no"});
      }
      put("embeddings/repeats.csv", t.csv());
    }
    if (comparison->best_run) {
      save_trace_csv(directory / "embeddings/trace.csv", *comparison->best_run);
      files.written.emplace_back("embeddings/trace.csv");
      save_network(directory / "embeddings/network.json", *comparison->best_run, network_config(config));
      files.written.emplace_back("embeddings/network.json");
    }
    if (!comparison->projected.empty()) {
      put("projected.md", projection_table_md(comparison->projected));
      put("projected.csv", projection_table_csv(comparison->projected));
      put("projected_filtered.md", projection_table_md(filter_report(comparison->projected, 0.05, 0.05)));
      put("projected_independent.csv",
          projection_table_csv(project_all(comparison->estimates.at("embeddings"), comparison->encoders.at("embeddings"),
                                           {.independent = true})));
    }
    if (comparison->encoders.count("embeddings")) {
      std::size_t li = 0;
      for (const auto& ve : comparison->encoders.at("embeddings").variables()) {
        if (ve.category_count() < 3) {
          omitted.push_back("mds/" + ve.variable + " (fewer than 3 categories)");
          continue;
        }
        const auto& layout = comparison->layouts.at(li++);
        put("mds/" + ve.variable + ".csv", mds_csv(layout));
        put("mds/" + ve.variable + ".svg", mds_svg(layout, ve.variable + " embeddings (classical MDS)"));
      }
    }
    for (const auto& [k, v] : comparison->timings) timings[k] = v;
    json seeds = json::array();
    for (const auto& r : comparison->repeats) seeds.push_back(r.seed);
    manifest["embedding_run_seeds"] = seeds;
  } else {
    omitted.push_back("comparison");
  }

  if (sweeps.empty()) omitted.push_back("sweep");
  for (const auto& s : sweeps) {
    const std::string name(scenario_name(s.scenario));
    put("sweep_" + name + ".csv", sweep_csv(s));
    put("sweep_" + name + ".svg", sweep_svg(s));
    timings["sweep_" + name] = s.seconds;
  }
  manifest["omitted"] = omitted;
  manifest["timings_seconds"] = timings;
  json written = json::array();
  for (const auto& f : files.written) written.push_back(f.generic_string());
  manifest["files"] = written;
  put("manifest.json", manifest.dump(1) + "\n");
  return files;
}

}  // namespace travelemb
