#include "travelemb/config.hpp"

#include "travelemb/report.hpp"

#include <json.hpp>
#include <toml.hpp>

#include <set>
#include <sstream>

namespace travelemb {

using json = nlohmann::json;

namespace {

json to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (auto&& [key, value] : *t) out[std::string(key.str())] = to_json(value);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& value : *a) out.push_back(to_json(value));
    return out;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) return i->get();
  if (const auto* f = node.as_floating_point()) return f->get();
  if (const auto* b = node.as_boolean()) return b->get();
  throw Error("config: unsupported TOML value (dates and times are not used)");
}

json parse_toml(std::string_view text) {
  try {
    return to_json(toml::parse(text));
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " at line " << e.source().begin.line << ", column "
        << e.source().begin.column;
    throw Error(msg.str());
  }
}

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw Error("config: " + std::string(where) + " must be a table");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw Error("config: unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(std::string("config: key '") + key + "' has the wrong type");
  }
}

ExperimentConfig from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "experiment config",
             {"dataset", "seed", "output_dir", "roster", "split", "encoding", "embeddings", "estimation", "sweep"});
  ExperimentConfig c;
  if (j.contains("dataset")) {
    std::filesystem::path p = get<std::string>(j, "dataset", "");
    c.dataset = p.is_relative() ? base_dir / p : p;
  }
  if (j.contains("output_dir")) c.output_dir = get<std::string>(j, "output_dir", "");
  c.seed = get<std::uint64_t>(j, "seed", c.seed);
  if (j.contains("roster")) {
    c.roster.clear();
    for (const auto& m : get<std::vector<std::string>>(j, "roster", {})) c.roster.push_back(parse_model(m));
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_keys(s, "split", {"ratios"});
    const auto ratios = get<std::vector<double>>(s, "ratios", {0.6, 0.2, 0.2});
    if (ratios.size() != 3) throw Error("config: split.ratios needs three values");
    c.split.ratios = {ratios[0], ratios[1], ratios[2]};
  }
  if (j.contains("encoding")) {
    c.k_values.clear();
    for (const auto& e : j.at("encoding")) {
      check_keys(e, "encoding entry", {"name", "k"});
      c.k_values.emplace_back(e.at("name").get<std::string>(), e.at("k").get<int>());
    }
  }
  if (j.contains("embeddings")) {
    const auto& e = j.at("embeddings");
    check_keys(e, "embeddings",
               {"epochs", "repeats", "learning_rate", "batch_size", "l2", "init_scale", "reconstruction_weight",
                "reconstruction_weights", "covariates", "threads", "adam"});
    auto& n = c.embeddings;
    n.epochs = get<int>(e, "epochs", n.epochs);
    n.repeats = get<int>(e, "repeats", n.repeats);
    n.learning_rate = get<double>(e, "learning_rate", n.learning_rate);
    n.batch_size = get<int>(e, "batch_size", n.batch_size);
    n.l2 = get<double>(e, "l2", n.l2);
    n.init_scale = get<double>(e, "init_scale", n.init_scale);
    n.threads = get<unsigned>(e, "threads", n.threads);
    n.covariates = get<std::vector<std::string>>(e, "covariates", n.covariates);
    const double gamma = get<double>(e, "reconstruction_weight", EmbeddingVariableConfig{}.reconstruction_weight);
    n.variables.clear();
    for (const auto& [name, k] : c.k_values) n.variables.push_back({name, k, gamma});
    if (e.contains("reconstruction_weights")) {
      for (const auto& [name, w] : e.at("reconstruction_weights").items()) {
        bool found = false;
        for (auto& v : n.variables) {
          if (v.name == name) {
            v.reconstruction_weight = w.get<double>();
            found = true;
          }
        }
        if (!found) throw Error("config: reconstruction weight for unknown variable " + name);
      }
    }
    if (e.contains("adam")) {
      const auto& a = e.at("adam");
      check_keys(a, "embeddings.adam", {"beta1", "beta2", "epsilon"});
      n.adam.beta1 = get<double>(a, "beta1", n.adam.beta1);
      n.adam.beta2 = get<double>(a, "beta2", n.adam.beta2);
      n.adam.epsilon = get<double>(a, "epsilon", n.adam.epsilon);
    }
  }
  if (j.contains("estimation")) {
    const auto& e = j.at("estimation");
    check_keys(e, "estimation", {"max_iterations", "gradient_tolerance", "max_halvings"});
    c.estimation.max_iterations = get<int>(e, "max_iterations", c.estimation.max_iterations);
    c.estimation.gradient_tolerance = get<double>(e, "gradient_tolerance", c.estimation.gradient_tolerance);
    c.estimation.max_halvings = get<int>(e, "max_halvings", c.estimation.max_halvings);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    check_keys(s, "sweep", {"fractions", "scenarios", "repeats"});
    c.sweep.fractions = get<std::vector<double>>(s, "fractions", c.sweep.fractions);
    c.sweep.repeats = get<int>(s, "repeats", c.sweep.repeats);
    if (s.contains("scenarios")) {
      c.sweep.scenarios.clear();
      for (const auto& name : get<std::vector<std::string>>(s, "scenarios", {}))
        c.sweep.scenarios.push_back(parse_scenario(name));
    }
  }
  c.validate();
  return c;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view text, bool toml, const std::filesystem::path& base_dir) {
  json j;
  if (toml) {
    j = parse_toml(text);
  } else {
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(std::string("config: ") + e.what());
    }
  }
  return from_json(j, base_dir);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  const auto text = read_text(path);
  const bool toml = path.extension() != ".json";
  return parse_experiment_config(text, toml, path.parent_path());
}

std::string experiment_config_json(const ExperimentConfig& c) {
  const auto net = network_config(c);
  json j;
  j["dataset"] = c.dataset.filename().generic_string();
  j["seed"] = c.seed;
  json roster = json::array();
  for (auto m : c.roster) roster.push_back(model_name(m));
  j["roster"] = roster;
  j["split"] = {{"ratios", c.split.ratios}};
  json enc = json::array();
  for (const auto& [name, k] : c.k_values) enc.push_back({{"name", name}, {"k", k}});
  j["encoding"] = enc;
  json weights = json::object();
  for (const auto& v : net.variables) weights[v.name] = v.reconstruction_weight;
  j["embeddings"] = {{"epochs", net.epochs},
                     {"repeats", net.repeats},
                     {"learning_rate", net.learning_rate},
                     {"batch_size", net.batch_size},
                     {"l2", net.l2},
                     {"init_scale", net.init_scale},
                     {"reconstruction_weights", weights},
                     {"covariates", net.covariates},
                     {"adam", {{"beta1", net.adam.beta1}, {"beta2", net.adam.beta2}, {"epsilon", net.adam.epsilon}}}};
  j["estimation"] = {{"max_iterations", c.estimation.max_iterations},
                     {"gradient_tolerance", c.estimation.gradient_tolerance},
                     {"max_halvings", c.estimation.max_halvings}};
  json scenarios = json::array();
  for (auto s : c.sweep.scenarios) scenarios.push_back(scenario_name(s));
  j["sweep"] = {{"fractions", c.sweep.fractions}, {"scenarios", scenarios}, {"repeats", c.sweep.repeats}};
  return j.dump();
}

std::string config_hash(const ExperimentConfig& config) { return hex64(fnv1a64(experiment_config_json(config))); }

UtilitySpecFile parse_utility_spec(std::string_view toml_text) {
  const json j = parse_toml(toml_text);
  check_keys(j, "utility spec", {"base", "term", "encoded"});
  UtilitySpecFile out;
  out.spec.base = parse_alternative(get<std::string>(j, "base", "car"));
  if (j.contains("term")) {
    for (const auto& t : j.at("term")) {
      check_keys(t, "term", {"label", "train", "sm", "car", "description"});
      UtilityTerm term;
      term.label = get<std::string>(t, "label", "");
      term.features = {get<std::string>(t, "train", ""), get<std::string>(t, "sm", ""), get<std::string>(t, "car", "")};
      term.description = get<std::string>(t, "description", "");
      out.spec.terms.push_back(std::move(term));
    }
  }
  if (j.contains("encoded")) {
    for (const auto& e : j.at("encoded")) {
      check_keys(e, "encoded", {"variable", "alternatives", "k"});
      EncodedTerm term;
      term.variable = get<std::string>(e, "variable", "");
      for (const auto& a : get<std::vector<std::string>>(e, "alternatives", {})) term.alternatives.push_back(parse_alternative(a));
      if (e.contains("k")) out.k_values.emplace_back(term.variable, e.at("k").get<int>());
      out.spec.encoded.push_back(std::move(term));
    }
  }
  out.spec.validate();
  return out;
}

UtilitySpecFile load_utility_spec(const std::filesystem::path& path) { return parse_utility_spec(read_text(path)); }

}  // namespace travelemb
