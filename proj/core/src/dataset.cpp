#include "travelemb/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace travelemb {

namespace {

using json = nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::optional<double> parse_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// Canton order of the Swissmetro ORIGIN/DEST coding.
constexpr std::array<const char*, 26> kCantons = {
    "ZH", "BE", "LU", "UR", "SZ", "OW", "NW", "GL", "ZG", "FR", "SO", "BS", "BL",
    "SH", "AR", "AI", "SG", "GR", "AG", "TG", "TI", "VD", "VS", "NE", "GE", "JU"};

std::string canton_name(std::string_view code) {
  const auto v = parse_number(code);
  if (v && *v >= 1 && *v <= 26) return kCantons[static_cast<std::size_t>(*v) - 1];
  return std::string(code);
}

std::string od_display(std::string_view label) {
  const auto pos = label.find('_');
  if (pos == std::string_view::npos) return std::string(label);
  return canton_name(label.substr(0, pos)) + "_" + canton_name(label.substr(pos + 1));
}

template <std::size_t N>
std::string lookup_name(const std::array<const char*, N>& names, std::string_view label) {
  const auto v = parse_number(label);
  if (v && *v >= 0 && static_cast<std::size_t>(*v) < N) return names[static_cast<std::size_t>(*v)];
  return std::string(label);
}

std::string ticket_display(std::string_view label) {
  static constexpr std::array<const char*, 11> names = {
      "None",           "2 way w 1/2 price", "1 way w 1/2 price",
      "2 way normal price", "1 way normal price", "Half day",
      "Annual ticket",  "Annual ticket Junior or Senior", "Free travel after 7pm",
      "Group ticket",   "Other"};
  return lookup_name(names, label);
}

std::string who_display(std::string_view label) {
  static constexpr std::array<const char*, 4> names = {"unknown", "self", "employer", "half-half"};
  return lookup_name(names, label);
}

std::string age_display(std::string_view label) {
  static constexpr std::array<const char*, 7> names = {
      "?", "age<=24", "24<age<=39", "39<age<=54", "54<age<=65", "65 <age", "not known"};
  return lookup_name(names, label);
}

std::string income_display(std::string_view label) {
  static constexpr std::array<const char*, 5> names = {
      "under 50", "under 50", "between 50 and 100", "over 100", "unknown"};
  return lookup_name(names, label);
}

std::string int_label(double v) { return std::to_string(static_cast<long long>(std::llround(v))); }

}  // namespace

// ---------------------------------------------------------------------------
// RawTable
// ---------------------------------------------------------------------------

std::optional<std::size_t> RawTable::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t RawTable::column_index(std::string_view name) const {
  if (auto idx = find_column(name)) return *idx;
  throw Error("schema column missing: " + std::string(name));
}

RawTable parse_raw(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw ParseError("malformed header: empty input", 1, "");
  }
  const char sep = line.find('\t') != std::string::npos ? '\t' : ',';

  RawTable table;
  std::set<std::string, std::less<>> seen;
  for (auto name : split_line(line, sep)) {
    if (name.empty()) throw ParseError("malformed header: empty column name", 1, "");
    if (!seen.insert(std::string(name)).second) {
      throw ParseError("malformed header: duplicate column " + std::string(name), 1, std::string(name));
    }
    table.columns.emplace_back(name);
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, sep);
    if (cells.size() != table.columns.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(table.columns.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no, "");
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto value = parse_number(cells[c]);
      if (!value) {
        throw ParseError("line " + std::to_string(line_no) + ", column " + table.columns[c] +
                             ": non-numeric cell '" + std::string(cells[c]) + "'",
                         line_no, table.columns[c]);
      }
      row[c] = *value;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

RawTable load_raw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing file: " + path.string());
  return parse_raw(in);
}

// ---------------------------------------------------------------------------
// CategoryMap
// ---------------------------------------------------------------------------

CategoryMap CategoryMap::from_observed(std::string variable, std::vector<std::string> observed,
                                       std::string (*namer)(std::string_view)) {
  std::sort(observed.begin(), observed.end());
  observed.erase(std::unique(observed.begin(), observed.end()), observed.end());
  CategoryMap map;
  map.variable = std::move(variable);
  map.labels = std::move(observed);
  map.display.reserve(map.labels.size());
  for (const auto& label : map.labels) map.display.push_back(namer ? namer(label) : label);
  return map;
}

std::optional<int> CategoryMap::find(std::string_view label) const {
  const auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label) return std::nullopt;
  return static_cast<int>(it - labels.begin());
}

int CategoryMap::index(std::string_view label) const {
  if (auto idx = find(label)) return *idx;
  throw Error("variable " + variable + ": unknown category '" + std::string(label) + "'");
}

const std::string& CategoryMap::display_name(int index) const {
  const auto i = static_cast<std::size_t>(index);
  return i < display.size() ? display[i] : labels.at(i);
}

// ---------------------------------------------------------------------------
// ChoiceDataset
// ---------------------------------------------------------------------------

ChoiceDataset::ChoiceDataset(DatasetColumns columns) : cols_(std::move(columns)) {
  const std::size_t n = cols_.choice.size();
  if (cols_.features.size() != cols_.feature_names.size()) throw Error("feature name/column count mismatch");
  if (cols_.category_codes.size() != cols_.category_maps.size()) throw Error("category map/code count mismatch");
  if (cols_.availability.size() != n || cols_.observation_id.size() != n || cols_.respondent_id.size() != n) {
    throw Error("dataset column lengths differ");
  }
  for (std::size_t f = 0; f < cols_.features.size(); ++f) {
    if (cols_.features[f].size() != n) throw Error("feature " + cols_.feature_names[f] + " has wrong length");
    for (double v : cols_.features[f]) {
      if (!std::isfinite(v)) throw Error("feature " + cols_.feature_names[f] + " has a non-finite value");
    }
  }
  for (std::size_t v = 0; v < cols_.category_codes.size(); ++v) {
    const auto& codes = cols_.category_codes[v];
    const auto d = static_cast<int>(cols_.category_maps[v].size());
    if (codes.size() != n) throw Error("categorical " + cols_.category_maps[v].variable + " has wrong length");
    for (int c : codes) {
      if (c < 0 || c >= d) throw Error("categorical " + cols_.category_maps[v].variable + " code out of range");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int y = cols_.choice[i];
    if (y < 0 || y >= kNumAlternatives) throw Error("choice index out of range");
    if (!cols_.availability[i][static_cast<std::size_t>(y)]) {
      throw Error("observation " + std::to_string(cols_.observation_id[i]) + ": chosen alternative unavailable");
    }
  }
}

bool ChoiceDataset::has_feature(std::string_view name) const {
  return std::find(cols_.feature_names.begin(), cols_.feature_names.end(), name) != cols_.feature_names.end();
}

std::size_t ChoiceDataset::feature_slot(std::string_view name) const {
  for (std::size_t i = 0; i < cols_.feature_names.size(); ++i) {
    if (cols_.feature_names[i] == name) return i;
  }
  throw Error("unknown feature: " + std::string(name));
}

std::span<const double> ChoiceDataset::feature(std::string_view name) const {
  return cols_.features[feature_slot(name)];
}

bool ChoiceDataset::has_categorical(std::string_view variable) const {
  return std::any_of(cols_.category_maps.begin(), cols_.category_maps.end(),
                     [&](const CategoryMap& m) { return m.variable == variable; });
}

std::size_t ChoiceDataset::categorical_slot(std::string_view variable) const {
  for (std::size_t i = 0; i < cols_.category_maps.size(); ++i) {
    if (cols_.category_maps[i].variable == variable) return i;
  }
  throw Error("unknown categorical variable: " + std::string(variable));
}

const CategoryMap& ChoiceDataset::category_map(std::string_view variable) const {
  return cols_.category_maps[categorical_slot(variable)];
}

std::span<const int> ChoiceDataset::codes(std::string_view variable) const {
  return cols_.category_codes[categorical_slot(variable)];
}

const std::string& ChoiceDataset::label(std::string_view variable, std::size_t row) const {
  const auto slot = categorical_slot(variable);
  return cols_.category_maps[slot].labels[static_cast<std::size_t>(cols_.category_codes[slot][row])];
}

ChoiceDataset ChoiceDataset::subset(std::span<const std::size_t> rows) const {
  auto pick = [&](const auto& src) {
    std::remove_cvref_t<decltype(src)> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(src.at(r));
    return out;
  };
  DatasetColumns out;
  out.feature_names = cols_.feature_names;
  for (const auto& f : cols_.features) out.features.push_back(pick(f));
  out.category_maps = cols_.category_maps;
  for (const auto& c : cols_.category_codes) out.category_codes.push_back(pick(c));
  out.choice = pick(cols_.choice);
  out.availability = pick(cols_.availability);
  out.observation_id = pick(cols_.observation_id);
  out.respondent_id = pick(cols_.respondent_id);
  ChoiceDataset result;
  result.cols_ = std::move(out);
  return result;
}

ChoiceDataset ChoiceDataset::with_categoricals(const std::vector<std::string>& variables) const {
  ChoiceDataset result = *this;
  result.cols_.category_maps.clear();
  result.cols_.category_codes.clear();
  for (const auto& v : variables) {
    const auto slot = categorical_slot(v);
    result.cols_.category_maps.push_back(cols_.category_maps[slot]);
    result.cols_.category_codes.push_back(cols_.category_codes[slot]);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Swissmetro
// ---------------------------------------------------------------------------

const std::vector<FeatureDefinition>& swissmetro_feature_definitions() {
  static const std::vector<FeatureDefinition> defs = {
      {"TRAIN_TT", "TRAIN_TT / 60 (hours)"},
      {"SM_TT", "SM_TT / 60 (hours)"},
      {"CAR_TT", "CAR_TT / 60 (hours)"},
      {"TRAIN_COST", "TRAIN_CO * (GA == 0) / 100"},
      {"SM_COST", "SM_CO * (GA == 0) / 100"},
      {"CAR_COST", "CAR_CO / 100"},
      {"TRAIN_HE", "TRAIN_HE / 60 (hours)"},
      {"SM_HE", "SM_HE / 60 (hours)"},
      {"SM_SEATS", "SM_SEATS (airline seating, 0/1)"},
      {"SURVEY_TRAIN", "SURVEY == 0 (surveyed on a train)"},
      {"FIRST_FALSE", "FIRST == 0"},
      {"LUGGAGE_1", "LUGGAGE == 1"},
      {"LUGGAGE_GT1", "LUGGAGE > 1"},
      {"GA", "GA (annual pass, 0/1)"},
  };
  return defs;
}

const std::vector<std::string>& swissmetro_categoricals() {
  static const std::vector<std::string> vars = {"OD", "TICKET", "WHO", "AGE", "INCOME"};
  return vars;
}

ChoiceDataset filter_and_derive(const RawTable& raw, const FilterRules& rules) {
  auto col = [&](std::initializer_list<std::string_view> names) -> std::size_t {
    for (auto n : names) {
      if (auto idx = raw.find_column(n)) return *idx;
    }
    throw Error("schema column missing: " + std::string(*names.begin()));
  };
  const std::size_t c_choice = col({"CHOICE"}), c_train_tt = col({"TRAIN_TT"}), c_sm_tt = col({"SM_TT"}),
                    c_car_tt = col({"CAR_TT"}), c_train_co = col({"TRAIN_CO"}), c_sm_co = col({"SM_CO"}),
                    c_car_co = col({"CAR_CO"}), c_train_he = col({"TRAIN_HE"}), c_sm_he = col({"SM_HE"}),
                    c_ga = col({"GA"}), c_seats = col({"SM_SEATS", "SEATS"}), c_survey = col({"SURVEY"}),
                    c_first = col({"FIRST"}), c_luggage = col({"LUGGAGE"}), c_orig = col({"ORIGIN", "ORIG"}),
                    c_dest = col({"DEST"}), c_ticket = col({"TICKET"}), c_who = col({"WHO"}),
                    c_age = col({"AGE"}), c_income = col({"INCOME"}), c_purpose = col({"PURPOSE"}),
                    c_train_av = col({"TRAIN_AV"}), c_sm_av = col({"SM_AV"}), c_car_av = col({"CAR_AV"}),
                    c_id = col({"ID"});

  const auto& defs = swissmetro_feature_definitions();
  DatasetColumns out;
  for (const auto& d : defs) out.feature_names.push_back(d.name);
  out.features.resize(defs.size());
  std::vector<std::vector<std::string>> labels(swissmetro_categoricals().size());

  auto contains = [](const std::vector<int>& set, double v) {
    return std::find(set.begin(), set.end(), static_cast<int>(std::llround(v))) != set.end();
  };

  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& row = raw.rows[r];
    const int choice_code = static_cast<int>(std::llround(row[c_choice]));
    if (choice_code == 0 && rules.drop_choice_zero) continue;
    if (choice_code < 1 || choice_code > kNumAlternatives) continue;
    const Availability av{row[c_train_av] != 0.0, row[c_sm_av] != 0.0, row[c_car_av] != 0.0};
    const int y = choice_code - 1;
    if (!av[static_cast<std::size_t>(y)]) {
      if (rules.drop_unavailable_choice) continue;
      throw Error("row " + std::to_string(r + 2) + ": chosen alternative unavailable");
    }
    if (contains(rules.drop_age_classes, row[c_age])) continue;
    if (!contains(rules.known_purposes, row[c_purpose])) continue;

    const double ga0 = row[c_ga] == 0.0 ? 1.0 : 0.0;
    const double values[] = {
        row[c_train_tt] / 60.0,
        row[c_sm_tt] / 60.0,
        row[c_car_tt] / 60.0,
        row[c_train_co] * ga0 / 100.0,
        row[c_sm_co] * ga0 / 100.0,
        row[c_car_co] / 100.0,
        row[c_train_he] / 60.0,
        row[c_sm_he] / 60.0,
        row[c_seats],
        row[c_survey] == 0.0 ? 1.0 : 0.0,
        row[c_first] == 0.0 ? 1.0 : 0.0,
        row[c_luggage] == 1.0 ? 1.0 : 0.0,
        row[c_luggage] > 1.0 ? 1.0 : 0.0,
        row[c_ga],
    };
    static_assert(std::size(values) == 14);
    for (std::size_t f = 0; f < defs.size(); ++f) out.features[f].push_back(values[f]);

    double income = row[c_income];
    if (rules.merge_income_zero && income == 0.0) income = 1.0;
    labels[0].push_back(int_label(row[c_orig]) + "_" + int_label(row[c_dest]));
    labels[1].push_back(int_label(row[c_ticket]));
    labels[2].push_back(int_label(row[c_who]));
    labels[3].push_back(int_label(row[c_age]));
    labels[4].push_back(int_label(income));

    out.choice.push_back(y);
    out.availability.push_back(av);
    out.observation_id.push_back(static_cast<std::int64_t>(r));
    out.respondent_id.push_back(static_cast<std::int64_t>(std::llround(row[c_id])));
  }
  if (out.choice.empty()) throw Error("all rows filtered out");

  using Namer = std::string (*)(std::string_view);
  const Namer namers[] = {od_display, ticket_display, who_display, age_display, income_display};
  for (std::size_t v = 0; v < labels.size(); ++v) {
    auto map = CategoryMap::from_observed(swissmetro_categoricals()[v], labels[v], namers[v]);
    std::vector<int> codes;
    codes.reserve(labels[v].size());
    for (const auto& l : labels[v]) codes.push_back(map.index(l));
    out.category_maps.push_back(std::move(map));
    out.category_codes.push_back(std::move(codes));
  }
  return ChoiceDataset(std::move(out));
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0 && r < 1.0)) throw Error("split ratio must lie in (0,1)");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("split ratios must sum to 1");
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  if (n == 0) throw Error("cannot split an empty dataset");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(order);

  const auto n_train = static_cast<std::size_t>(std::llround(spec.ratios[0] * static_cast<double>(n)));
  const auto n_dev = std::min(n - n_train,
                              static_cast<std::size_t>(std::llround(spec.ratios[1] * static_cast<double>(n))));
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.dev.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), order.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.dev.begin(), out.dev.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

DataSplit split(const ChoiceDataset& data, const SplitSpec& spec) {
  if (data.empty()) throw Error("cannot split an empty dataset");
  DataSplit out;
  out.indices = split_indices(data.size(), spec);
  out.train = data.subset(out.indices.train);
  out.dev = data.subset(out.indices.dev);
  out.test = data.subset(out.indices.test);
  return out;
}

// ---------------------------------------------------------------------------
// Encoding set
// ---------------------------------------------------------------------------

void validate_encoding_set(const EncodingSetSpec& spec) {
  std::set<std::string> names;
  for (const auto& e : spec) {
    if (!names.insert(e.name).second) throw Error("duplicate encoded variable " + e.name);
    if (e.k < 1 || e.k >= e.original_dim) {
      throw Error("encoded variable " + e.name + ": need 1 <= K < D, got K=" + std::to_string(e.k) +
                  ", D=" + std::to_string(e.original_dim));
    }
  }
}

EncodingSetSpec resolve_encoding_set(const std::vector<std::pair<std::string, int>>& k_values,
                                     const ChoiceDataset& data) {
  EncodingSetSpec spec;
  for (const auto& [name, k] : k_values) {
    spec.push_back({name, k, static_cast<int>(data.category_map(name).size())});
  }
  validate_encoding_set(spec);
  return spec;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kAltColumns[] = {"AV_TRAIN", "AV_SM", "AV_CAR"};

json indices_json(const std::vector<std::size_t>& idx) { return json(idx); }

}  // namespace

void save_dataset(const std::filesystem::path& dir, const ChoiceDataset& data,
                  const std::optional<SplitSpec>& spec, const std::optional<SplitIndices>& split) {
  std::filesystem::create_directories(dir);
  const auto& cols = data.columns();
  {
    std::ofstream csv(dir / "dataset.csv");
    if (!csv) throw Error("cannot write " + (dir / "dataset.csv").string());
    csv << "OBS_ID,RESPONDENT_ID,CHOICE";
    for (auto* a : kAltColumns) csv << ',' << a;
    for (const auto& f : cols.feature_names) csv << ',' << f;
    for (const auto& m : cols.category_maps) csv << ',' << m.variable;
    csv << '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
      csv << cols.observation_id[i] << ',' << cols.respondent_id[i] << ',' << cols.choice[i];
      for (bool a : cols.availability[i]) csv << ',' << (a ? 1 : 0);
      for (const auto& f : cols.features) csv << ',' << format_double(f[i]);
      for (std::size_t v = 0; v < cols.category_maps.size(); ++v) {
        csv << ',' << cols.category_maps[v].labels[static_cast<std::size_t>(cols.category_codes[v][i])];
      }
      csv << '\n';
    }
  }

  json meta;
  meta["format"] = "travelemb-dataset";
  meta["version"] = 1;
  meta["rows"] = data.size();
  meta["features"] = json::array();
  const auto& defs = swissmetro_feature_definitions();
  for (const auto& name : cols.feature_names) {
    std::string definition;
    for (const auto& d : defs) {
      if (d.name == name) definition = d.definition;
    }
    meta["features"].push_back({{"name", name}, {"definition", definition}});
  }
  meta["categories"] = json::array();
  for (const auto& m : cols.category_maps) {
    meta["categories"].push_back({{"variable", m.variable}, {"labels", m.labels}, {"display", m.display}});
  }
  if (spec) meta["split_spec"] = {{"ratios", spec->ratios}, {"seed", spec->seed}};
  if (split) {
    meta["split"] = {{"train", indices_json(split->train)},
                     {"dev", indices_json(split->dev)},
                     {"test", indices_json(split->test)}};
  }
  std::ofstream js(dir / "dataset.json");
  if (!js) throw Error("cannot write " + (dir / "dataset.json").string());
  js << meta.dump(1) << '\n';
}

PreparedDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream js(dir / "dataset.json");
  if (!js) throw Error("missing file: " + (dir / "dataset.json").string());
  const json meta = json::parse(js);

  DatasetColumns cols;
  for (const auto& f : meta.at("features")) cols.feature_names.push_back(f.at("name").get<std::string>());
  for (const auto& c : meta.at("categories")) {
    CategoryMap m;
    m.variable = c.at("variable").get<std::string>();
    m.labels = c.at("labels").get<std::vector<std::string>>();
    m.display = c.value("display", m.labels);
    cols.category_maps.push_back(std::move(m));
  }
  cols.features.resize(cols.feature_names.size());
  cols.category_codes.resize(cols.category_maps.size());

  std::ifstream csv(dir / "dataset.csv");
  if (!csv) throw Error("missing file: " + (dir / "dataset.csv").string());
  std::string line;
  std::getline(csv, line);
  const std::size_t expected = 3 + 3 + cols.feature_names.size() + cols.category_maps.size();
  if (split_line(line, ',').size() != expected) throw ParseError("malformed header in dataset.csv", 1, "");
  std::size_t line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, ',');
    if (cells.size() != expected) throw ParseError("dataset.csv: wrong cell count", line_no, "");
    auto num = [&](std::size_t i) {
      auto v = parse_number(cells[i]);
      if (!v) throw ParseError("dataset.csv: non-numeric cell", line_no, std::to_string(i));
      return *v;
    };
    cols.observation_id.push_back(static_cast<std::int64_t>(num(0)));
    cols.respondent_id.push_back(static_cast<std::int64_t>(num(1)));
    cols.choice.push_back(static_cast<int>(num(2)));
    cols.availability.push_back({num(3) != 0.0, num(4) != 0.0, num(5) != 0.0});
    std::size_t c = 6;
    for (auto& f : cols.features) f.push_back(num(c++));
    for (std::size_t v = 0; v < cols.category_maps.size(); ++v) {
      cols.category_codes[v].push_back(cols.category_maps[v].index(cells[c++]));
    }
  }

  PreparedDataset out{ChoiceDataset(std::move(cols)), std::nullopt, std::nullopt};
  if (meta.contains("split_spec")) {
    SplitSpec s;
    s.ratios = meta["split_spec"].at("ratios").get<std::array<double, 3>>();
    s.seed = meta["split_spec"].at("seed").get<std::uint64_t>();
    out.split_spec = s;
  }
  if (meta.contains("split")) {
    SplitIndices idx;
    idx.train = meta["split"].at("train").get<std::vector<std::size_t>>();
    idx.dev = meta["split"].at("dev").get<std::vector<std::size_t>>();
    idx.test = meta["split"].at("test").get<std::vector<std::size_t>>();
    out.split = std::move(idx);
  }
  return out;
}

}  // namespace travelemb
