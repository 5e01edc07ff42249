#include "cli.hpp"

#include "travelemb/config.hpp"
#include "travelemb/harness.hpp"
#include "travelemb/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <functional>
#include <optional>
#include <ostream>

namespace travelemb::cli {

namespace {

using json = nlohmann::json;

enum class Format { md, csv, json };

struct Common {
  std::optional<std::uint64_t> seed;
  std::string format = "md";
  std::string out;
};

Format parse_format(const std::string& f) {
  if (f == "md") return Format::md;
  if (f == "csv") return Format::csv;
  return Format::json;
}

std::filesystem::path output_dir(const std::string& flag, const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("TRAVELEMB_OUT_DIR"); env && *env) return env;
  if (!flag.empty()) return flag;
  return fallback;
}

void banner(std::ostream& err, std::string_view command, std::uint64_t seed, const std::string& hash) {
  err << "travelemb " << command << " | seed " << seed << " | config " << hash << '\n';
}

std::string args_hash(const std::vector<std::string>& args) {
  std::string joined;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out") {
      ++i;
      continue;
    }
    joined += args[i];
    joined += '\x1f';
  }
  return hex64(fnv1a64(joined));
}

void add_common(CLI::App* cmd, Common& c, bool tables) {
  cmd->add_option("--seed", c.seed, "Random seed (drives the data split and all training)");
  if (tables) {
    cmd->add_option("--format", c.format, "Output format for tables on stdout")
        ->check(CLI::IsMember({"md", "csv", "json"}));
  }
}

ExperimentConfig experiment_config(const std::string& path, const Common& c) {
  ExperimentConfig config = path.empty() ? ExperimentConfig{} : load_experiment_config(path);
  if (c.seed) config.seed = *c.seed;
  return config;
}

SplitSpec split_for(std::uint64_t seed, const std::vector<double>& ratios) {
  SplitSpec spec;
  if (ratios.size() != 3) throw Error("--ratios needs three comma-separated values");
  spec.ratios = {ratios[0], ratios[1], ratios[2]};
  spec.seed = derive_seed(seed, "split");
  spec.validate();
  return spec;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Supervised embeddings for categorical variables in discrete choice models", "travelemb"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");
  std::function<int()> action;

  // prepare
  Common prep_c;
  std::string prep_input;
  std::vector<double> prep_ratios{0.6, 0.2, 0.2};
  auto* prep = app.add_subcommand("prepare", "Filter a raw Swissmetro CSV, derive features and store a seeded split");
  prep->add_option("--input", prep_input, "Raw CSV or TSV file")->required();
  prep->add_option("--out", prep_c.out, "Output directory (dataset.csv and dataset.json)")->required();
  prep->add_option("--ratios", prep_ratios, "Train, dev and test shares")->delimiter(',')->expected(3);
  add_common(prep, prep_c, false);
  prep->callback([&] {
    action = [&]() -> int {
      const std::uint64_t seed = prep_c.seed.value_or(ExperimentConfig{}.seed);
      banner(err, "prepare", seed, args_hash(args));
      const auto spec = split_for(seed, prep_ratios);
      const auto data = filter_and_derive(load_raw(prep_input));
      const auto idx = split_indices(data.size(), spec);
      const auto dir = output_dir(prep_c.out, prep_c.out);
      save_dataset(dir, data, spec, idx);
      out << "rows " << data.size() << " | train " << idx.train.size() << " | dev " << idx.dev.size() << " | test "
          << idx.test.size() << " -> " << dir.string() << '\n';
      return 0;
    };
  });

  // train-embeddings
  Common tr_c;
  std::string tr_config;
  std::string tr_data;
  std::optional<int> tr_repeats;
  std::optional<int> tr_epochs;
  auto* tr = app.add_subcommand("train-embeddings", "Train the embedding network with repeats and export the best run");
  tr->add_option("--config", tr_config, "Experiment config (TOML or JSON)")->required();
  tr->add_option("--data", tr_data, "Dataset override: raw CSV or prepared directory");
  tr->add_option("--repeats", tr_repeats, "Number of training runs")->check(CLI::PositiveNumber);
  tr->add_option("--epochs", tr_epochs, "Epochs per run")->check(CLI::PositiveNumber);
  tr->add_option("--out", tr_c.out, "Output directory");
  add_common(tr, tr_c, true);
  tr->callback([&] {
    action = [&]() -> int {
      auto config = experiment_config(tr_config, tr_c);
      if (!tr_data.empty()) config.dataset = tr_data;
      if (tr_repeats) config.embeddings.repeats = *tr_repeats;
      if (tr_epochs) config.embeddings.epochs = *tr_epochs;
      config.validate();
      banner(err, "train-embeddings", config.seed, config_hash(config));
      SplitSpec spec = config.split;
      spec.seed = derive_seed(config.seed, "split");
      const auto data = load_split(config.dataset, spec);
      const auto net = network_config(config);
      const auto repeats = run_repeats(net, data.train, data.dev);
      const auto dir = output_dir(tr_c.out, config.output_dir / "embeddings");
      save_network(dir / "network.json", repeats.best(), net);
      save_trace_csv(dir / "trace.csv", repeats.best());
      write_text(dir / "encoder.json", encoder_to_json(export_encoder(repeats.best(), net, data.train)));

      Table t;
      t.header = {"seed", "dev_log_likelihood", "final_train_loss", "best"};
      for (std::size_t i = 0; i < repeats.runs.size(); ++i) {
        const auto& r = repeats.runs[i];
        t.rows.push_back({std::to_string(r.seed), fixed(r.dev_log_likelihood, 4), fixed(r.train_loss.back(), 6),
                          i == repeats.best_index ? "yes" : ""});
      }
      write_text(dir / "repeats.csv", t.csv());
      switch (parse_format(tr_c.format)) {
        case Format::md: out << t.markdown(); break;
        case Format::csv: out << t.csv(); break;
        case Format::json: {
          json j = json::array();
          for (const auto& r : repeats.runs) j.push_back({{"seed", r.seed}, {"dev_log_likelihood", r.dev_log_likelihood}});
          out << json{{"runs", j}, {"best_seed", repeats.best().seed}, {"diverged", repeats.diverged_seeds}}.dump(1)
              << '\n';
        }
      }
      return 0;
    };
  });

  // estimate
  Common est_c;
  std::string est_data;
  std::string est_spec;
  std::string est_encoding = "dummy";
  std::string est_encoder;
  std::vector<double> est_ratios{0.6, 0.2, 0.2};
  bool est_drop = false;
  auto* est = app.add_subcommand("estimate", "Estimate a multinomial logit model on the training split");
  est->add_option("--data", est_data, "Raw CSV or prepared dataset directory")->required();
  est->add_option("--spec", est_spec, "Utility specification (TOML)")->required();
  est->add_option("--encoding", est_encoding, "Encoding of categorical terms")
      ->check(CLI::IsMember({"dummy", "pca", "embedding"}));
  est->add_option("--encoder", est_encoder, "Encoder JSON (required for --encoding embedding)");
  est->add_option("--ratios", est_ratios, "Split shares when --data is a raw CSV")->delimiter(',')->expected(3);
  est->add_flag("--drop-deficient", est_drop, "Drop rank-deficient columns instead of failing");
  est->add_option("--out", est_c.out, "Directory for result.json, coefficient tables and the encoder");
  add_common(est, est_c, true);
  est->callback([&] {
    action = [&]() -> int {
      const std::uint64_t seed = est_c.seed.value_or(ExperimentConfig{}.seed);
      banner(err, "estimate", seed, args_hash(args));
      const auto data = load_split(est_data, split_for(seed, est_ratios));
      const auto spec_file = load_utility_spec(est_spec);
      const auto kind = parse_encoder_kind(est_encoding);
      std::optional<EncoderModel> trained;
      if (kind == EncoderKind::embedding) {
        if (est_encoder.empty()) throw Error("--encoding embedding needs --encoder");
        trained = load_encoder(est_encoder);
      }
      EncoderModel enc;
      for (const auto& term : spec_file.spec.encoded) {
        if (trained) {
          enc.add(trained->at(term.variable));
          continue;
        }
        int k = 0;
        for (const auto& [name, kv] : spec_file.k_values)
          if (name == term.variable) k = kv;
        if (kind == EncoderKind::pca && k < 1) throw Error("PCA encoding needs k for " + term.variable + " in the spec");
        enc.add(make_encoding(kind, data.train, term.variable, k));
      }
      Design design = assemble_design(data.train, spec_file.spec, enc);
      std::vector<std::string> dropped;
      if (est_drop) {
        dropped = rank_deficient_columns(design);
        if (!dropped.empty()) {
          spdlog::warn("dropping {} rank-deficient column(s)", dropped.size());
          design = drop_columns(design, dropped);
        }
      }
      const auto result = estimate(design, {});
      Design test_design = assemble_design(data.test, spec_file.spec, enc);
      if (!dropped.empty()) test_design = drop_columns(test_design, dropped);
      const auto test = evaluate(result, test_design);

      if (!est_c.out.empty() || std::getenv("TRAVELEMB_OUT_DIR")) {
        const auto dir = output_dir(est_c.out, ".");
        write_text(dir / "result.json", result_to_json(result, test));
        write_text(dir / "coefficients.md", coefficient_table_md(result));
        write_text(dir / "coefficients.csv", coefficient_table_csv(result));
        write_text(dir / "encoder.json", encoder_to_json(enc));
      }
      switch (parse_format(est_c.format)) {
        case Format::md:
          out << coefficient_table_md(result) << "\nTest log-likelihood: " << fixed(test.log_likelihood, 3)
              << "  \nTest pseudo R2: " << fixed(test.r2, 4) << "  \nTest pseudo R-bar2: " << fixed(test.rbar2, 4)
              << '\n';
          break;
        case Format::csv: out << coefficient_table_csv(result); break;
        case Format::json: out << result_to_json(result, test); break;
      }
      return result.diagnostics.converged ? 0 : 1;
    };
  });

  // project
  Common pr_c;
  std::string pr_result;
  std::string pr_encoder;
  bool pr_independent = false;
  std::optional<double> pr_min_abs;
  double pr_alpha = 0.05;
  auto* pr = app.add_subcommand("project", "Project encoded coefficients back to one coefficient per category");
  pr->add_option("--result", pr_result, "result.json written by estimate")->required();
  pr->add_option("--encoder", pr_encoder, "Encoder JSON used for the estimation")->required();
  pr->add_flag("--independent", pr_independent, "Ignore covariances within a block when propagating errors");
  pr->add_option("--min-abs", pr_min_abs, "Keep only rows with |coef| above this and p below --alpha");
  pr->add_option("--alpha", pr_alpha, "Significance level for --min-abs filtering");
  pr->add_option("--out", pr_c.out, "Directory for projected.md and projected.csv");
  add_common(pr, pr_c, true);
  pr->callback([&] {
    action = [&]() -> int {
      banner(err, "project", pr_c.seed.value_or(0), args_hash(args));
      const auto result = result_from_json(read_text(pr_result));
      const auto full = load_encoder(pr_encoder);
      EncoderModel enc;
      for (const auto& ve : full.variables()) {
        for (const auto& b : result.blocks) {
          if (b.variable == ve.variable) {
            enc.add(ve);
            break;
          }
        }
      }
      auto rows = project_all(result, enc, {.independent = pr_independent});
      if (pr_min_abs) rows = filter_report(rows, *pr_min_abs, pr_alpha);
      if (!pr_c.out.empty() || std::getenv("TRAVELEMB_OUT_DIR")) {
        const auto dir = output_dir(pr_c.out, ".");
        write_text(dir / "projected.md", projection_table_md(rows));
        write_text(dir / "projected.csv", projection_table_csv(rows));
      }
      switch (parse_format(pr_c.format)) {
        case Format::md: out << projection_table_md(rows); break;
        case Format::csv: out << projection_table_csv(rows); break;
        case Format::json: out << projection_table_json(rows); break;
      }
      return 0;
    };
  });

  // mds
  Common mds_c;
  std::string mds_encoder;
  std::string mds_variable;
  auto* mds = app.add_subcommand("mds", "Two-dimensional classical MDS layout of one variable's encodings");
  mds->add_option("--encoder", mds_encoder, "Encoder JSON")->required();
  mds->add_option("--variable", mds_variable, "Variable to lay out")->required();
  mds->add_option("--out", mds_c.out, "Directory for <variable>.csv and <variable>.svg");
  add_common(mds, mds_c, true);
  mds->callback([&] {
    action = [&]() -> int {
      banner(err, "mds", mds_c.seed.value_or(0), args_hash(args));
      const auto enc = load_encoder(mds_encoder);
      const auto& ve = enc.at(mds_variable);
      const auto layout = classical_mds(pairwise_distances(ve.matrix), ve.categories.display, 2);
      if (layout.degenerate) spdlog::warn("layout is degenerate: fewer than two positive eigenvalues");
      if (!mds_c.out.empty() || std::getenv("TRAVELEMB_OUT_DIR")) {
        const auto dir = output_dir(mds_c.out, ".");
        write_text(dir / (mds_variable + ".csv"), mds_csv(layout));
        write_text(dir / (mds_variable + ".svg"), mds_svg(layout, mds_variable + " (classical MDS)"));
      }
      switch (parse_format(mds_c.format)) {
        case Format::md: {
          Table t;
          t.header = {"label", "x", "y"};
          for (Eigen::Index i = 0; i < layout.coordinates.rows(); ++i)
            t.rows.push_back({layout.labels[static_cast<std::size_t>(i)], fixed(layout.coordinates(i, 0), 6),
                              fixed(layout.coordinates(i, 1), 6)});
          out << t.markdown() << "\nStress: " << fixed(layout.stress, 10) << '\n';
          break;
        }
        case Format::csv: out << mds_csv(layout); break;
        case Format::json: {
          json pts = json::array();
          for (Eigen::Index i = 0; i < layout.coordinates.rows(); ++i)
            pts.push_back({{"label", layout.labels[static_cast<std::size_t>(i)]},
                           {"x", layout.coordinates(i, 0)},
                           {"y", layout.coordinates(i, 1)}});
          out << json{{"points", pts}, {"stress", layout.stress}, {"degenerate", layout.degenerate}}.dump(1) << '\n';
        }
      }
      return 0;
    };
  });

  // experiment
  Common ex_c;
  std::string ex_config;
  std::optional<int> ex_repeats;
  bool ex_with_sweep = false;
  auto* ex = app.add_subcommand("experiment", "Run the full model comparison and write a report directory");
  ex->add_option("--config", ex_config, "Experiment config (TOML or JSON)")->required();
  ex->add_option("--repeats", ex_repeats, "Override the number of embedding runs")->check(CLI::PositiveNumber);
  ex->add_flag("--with-sweep", ex_with_sweep, "Also run the configured survey-share sweeps");
  ex->add_option("--out", ex_c.out, "Report directory");
  add_common(ex, ex_c, true);
  ex->callback([&] {
    action = [&]() -> int {
      auto config = experiment_config(ex_config, ex_c);
      if (ex_repeats) config.embeddings.repeats = *ex_repeats;
      config.validate();
      banner(err, "experiment", config.seed, config_hash(config));
      SplitSpec spec = config.split;
      spec.seed = derive_seed(config.seed, "split");
      const auto data = load_split(config.dataset, spec);
      const auto comparison = run_comparison(config, data);
      std::vector<SweepResult> sweeps;
      if (ex_with_sweep)
        for (auto s : config.sweep.scenarios) sweeps.push_back(run_sweep(config, data, s));
      const auto dir = output_dir(ex_c.out, config.output_dir);
      export_report(config, &comparison, sweeps, dir);
      switch (parse_format(ex_c.format)) {
        case Format::md: out << summary_table_md(comparison.rows); break;
        case Format::csv: out << summary_table_csv(comparison.rows); break;
        case Format::json: out << read_text(dir / "manifest.json"); break;
      }
      return comparison.any_failed() ? 1 : 0;
    };
  });

  // sweep
  Common sw_c;
  std::string sw_config;
  std::string sw_scenario = "both";
  std::optional<int> sw_repeats;
  std::vector<double> sw_fractions;
  auto* sw = app.add_subcommand("sweep", "Test fit as the share of detailed survey data grows");
  sw->add_option("--config", sw_config, "Experiment config (TOML or JSON)")->required();
  sw->add_option("--scenario", sw_scenario, "Which cheap data source the embeddings see")
      ->check(CLI::IsMember({"light", "bigdata", "both"}));
  sw->add_option("--repeats", sw_repeats, "Embedding runs per scenario")->check(CLI::PositiveNumber);
  sw->add_option("--fractions", sw_fractions, "Comma-separated detailed-survey shares in (0, 1]")->delimiter(',');
  sw->add_option("--out", sw_c.out, "Report directory");
  add_common(sw, sw_c, true);
  sw->callback([&] {
    action = [&]() -> int {
      auto config = experiment_config(sw_config, sw_c);
      if (sw_repeats) config.sweep.repeats = *sw_repeats;
      if (!sw_fractions.empty()) config.sweep.fractions = sw_fractions;
      if (sw_scenario != "both") config.sweep.scenarios = {parse_scenario(sw_scenario)};
      config.validate();
      banner(err, "sweep", config.seed, config_hash(config));
      SplitSpec spec = config.split;
      spec.seed = derive_seed(config.seed, "split");
      const auto data = load_split(config.dataset, spec);
      std::vector<SweepResult> sweeps;
      for (auto s : config.sweep.scenarios) sweeps.push_back(run_sweep(config, data, s));
      const auto dir = output_dir(sw_c.out, config.output_dir);
      export_report(config, nullptr, sweeps, dir);
      for (const auto& s : sweeps) {
        if (parse_format(sw_c.format) == Format::json) {
          json pts = json::array();
          for (const auto& p : s.points) {
            json r = json::object();
            for (const auto& [m, v] : p.test_r2) r[m] = v ? json(*v) : json(nullptr);
            pts.push_back({{"fraction", p.fraction}, {"observations", p.observations}, {"test_r2", r}});
          }
          out << json{{"scenario", scenario_name(s.scenario)}, {"points", pts}}.dump(1) << '\n';
        } else {
          out << "# " << scenario_name(s.scenario) << '\n' << sweep_csv(s);
        }
      }
      return 0;
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return 2;
  }

  try {
    return action ? action() : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace travelemb::cli
