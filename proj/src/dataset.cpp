#include "aact/dataset.hpp"

#include "aact/error.hpp"
#include "aact/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace aact {
namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

// Comma-separated cells; double quotes may wrap a cell containing commas.
std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.emplace_back(trim(cell));
  return cells;
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
    return std::nullopt;
  return value;
}

FeatureKind kind_from_string(std::string_view text) {
  if (text == "categorical") return FeatureKind::categorical;
  if (text == "integer") return FeatureKind::integer;
  if (text == "continuous") return FeatureKind::continuous;
  fail(ErrorCode::parse_error, "unknown feature kind '" + std::string(text) + "'");
}

FeatureEncoding encoding_from_string(std::string_view text) {
  if (text == "onehot") return FeatureEncoding::onehot;
  if (text == "ordinal") return FeatureEncoding::ordinal;
  if (text == "raw") return FeatureEncoding::raw;
  if (text == "standardize") return FeatureEncoding::standardize;
  fail(ErrorCode::parse_error, "unknown feature encoding '" + std::string(text) + "'");
}

FeatureEncoding default_encoding(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::categorical: return FeatureEncoding::onehot;
    case FeatureKind::integer: return FeatureEncoding::raw;
    case FeatureKind::continuous: return FeatureEncoding::standardize;
  }
  return FeatureEncoding::raw;
}

std::string format_number(double value) {
  if (value == std::floor(value) && std::abs(value) < 1e15) {
    return std::to_string(static_cast<long long>(value));
  }
  std::ostringstream out;
  out.precision(6);
  out << value;
  return out.str();
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::categorical: return "categorical";
    case FeatureKind::integer: return "integer";
    case FeatureKind::continuous: return "continuous";
  }
  return "?";
}

std::string_view to_string(FeatureEncoding encoding) {
  switch (encoding) {
    case FeatureEncoding::onehot: return "onehot";
    case FeatureEncoding::ordinal: return "ordinal";
    case FeatureEncoding::raw: return "raw";
    case FeatureEncoding::standardize: return "standardize";
  }
  return "?";
}

std::string_view to_string(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::independent: return "independent";
    case SamplingMode::conditional: return "conditional";
    case SamplingMode::exhaustive: return "exhaustive";
  }
  return "?";
}

SamplingMode sampling_mode_from_string(std::string_view text) {
  if (text == "independent") return SamplingMode::independent;
  if (text == "conditional") return SamplingMode::conditional;
  if (text == "exhaustive") return SamplingMode::exhaustive;
  fail(ErrorCode::invalid_argument, "unknown sampling mode '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// FeatureSchema

std::optional<std::size_t> FeatureSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t FeatureSchema::index_of(std::string_view name) const {
  if (auto idx = find(name)) return *idx;
  fail(ErrorCode::not_found, "unknown feature '" + std::string(name) + "'");
}

std::size_t FeatureSchema::class_index(std::string_view label) const {
  const auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) fail(ErrorCode::not_found, "unknown class label '" + std::string(label) + "'");
  return static_cast<std::size_t>(it - classes.begin());
}

void FeatureSchema::validate() const {
  if (classes.size() < 2) fail(ErrorCode::invalid_argument, "schema needs at least 2 classes");
  std::set<std::string_view> seen;
  for (const auto& c : classes) {
    if (!seen.insert(c).second) fail(ErrorCode::invalid_argument, "duplicate class '" + c + "'");
  }
  seen.clear();
  for (const auto& f : features) {
    if (f.name.empty()) fail(ErrorCode::invalid_argument, "feature with empty name");
    if (!seen.insert(f.name).second)
      fail(ErrorCode::invalid_argument, "duplicate feature '" + f.name + "'");
    if (f.kind == FeatureKind::categorical && f.encoding != FeatureEncoding::onehot &&
        f.encoding != FeatureEncoding::ordinal)
      fail(ErrorCode::invalid_argument, "categorical feature '" + f.name + "' must use onehot or ordinal encoding");
    if (f.kind != FeatureKind::categorical &&
        (f.encoding == FeatureEncoding::onehot || f.encoding == FeatureEncoding::ordinal))
      fail(ErrorCode::invalid_argument, "numeric feature '" + f.name + "' must use raw or standardize encoding");
    if (!std::is_sorted(f.bin_edges.begin(), f.bin_edges.end()) ||
        std::adjacent_find(f.bin_edges.begin(), f.bin_edges.end()) != f.bin_edges.end())
      fail(ErrorCode::invalid_argument, "bin edges of '" + f.name + "' must increase strictly");
  }
  if (seen.contains(id_column) || seen.contains(label_column))
    fail(ErrorCode::invalid_argument, "id/label column clashes with a feature name");
}

bool FeatureSchema::finalized() const {
  return std::all_of(features.begin(), features.end(), [](const FeatureSpec& f) {
    return f.kind != FeatureKind::continuous || !f.bin_edges.empty();
  });
}

std::int64_t FeatureSchema::bin_of(std::size_t feature, double value) const {
  const auto& spec = features.at(feature);
  if (spec.kind != FeatureKind::continuous) return static_cast<std::int64_t>(std::llround(value));
  const auto it = std::upper_bound(spec.bin_edges.begin(), spec.bin_edges.end(), value);
  return static_cast<std::int64_t>(it - spec.bin_edges.begin());
}

double FeatureSchema::parse_value(std::size_t feature, std::string_view text) {
  auto& spec = features.at(feature);
  text = trim(text);
  switch (spec.kind) {
    case FeatureKind::categorical: {
      if (text.empty()) fail(ErrorCode::parse_error, "empty categorical value");
      const auto it = std::find(spec.levels.begin(), spec.levels.end(), text);
      if (it != spec.levels.end()) return static_cast<double>(it - spec.levels.begin());
      if (spec.levels_fixed)
        fail(ErrorCode::parse_error, "value '" + std::string(text) + "' not in declared levels");
      spec.levels.emplace_back(text);
      return static_cast<double>(spec.levels.size() - 1);
    }
    case FeatureKind::integer: {
      const auto v = parse_number(text);
      if (!v || *v != std::floor(*v))
        fail(ErrorCode::parse_error, "expected an integer, got '" + std::string(text) + "'");
      return *v;
    }
    case FeatureKind::continuous: {
      const auto v = parse_number(text);
      if (!v) fail(ErrorCode::parse_error, "expected a number, got '" + std::string(text) + "'");
      return *v;
    }
  }
  return 0.0;
}

std::string FeatureSchema::format_value(std::size_t feature, double value) const {
  const auto& spec = features.at(feature);
  if (spec.kind == FeatureKind::categorical) {
    const auto code = static_cast<std::size_t>(value);
    if (value >= 0 && code < spec.levels.size()) return spec.levels[code];
    return "<unknown>";
  }
  return format_number(value);
}

// ---------------------------------------------------------------------------
// Dataset

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(schema.class_count(), 0);
  for (const auto& row : rows) {
    if (row.label) ++counts[*row.label];
  }
  return counts;
}

const Instance* Dataset::find(std::string_view id) const {
  for (const auto& row : rows) {
    if (row.id == id) return &row;
  }
  return nullptr;
}

FeatureSchema schema_from_json(const json& config) {
  FeatureSchema schema;
  try {
    schema.id_column = config.value("id_column", std::string("id"));
    schema.label_column = config.value("label_column", std::string("label"));
    schema.classes = config.at("classes").get<std::vector<std::string>>();
    for (const auto& f : config.at("features")) {
      FeatureSpec spec;
      spec.name = f.at("name").get<std::string>();
      spec.label = f.value("label", spec.name);
      spec.kind = kind_from_string(f.at("kind").get<std::string>());
      spec.encoding = f.contains("encoding")
                          ? encoding_from_string(f.at("encoding").get<std::string>())
                          : default_encoding(spec.kind);
      if (f.contains("levels")) {
        spec.levels = f.at("levels").get<std::vector<std::string>>();
        spec.levels_fixed = true;
      }
      if (f.contains("bins")) {
        const auto& bins = f.at("bins");
        if (bins.is_array()) {
          spec.bin_edges = bins.get<std::vector<double>>();
        } else {
          spec.bin_count = bins.get<std::size_t>();
        }
      }
      if (spec.bin_count < 1) fail(ErrorCode::invalid_argument, "bins must be >= 1 for '" + spec.name + "'");
      schema.features.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("schema config: ") + e.what());
  }
  schema.validate();
  return schema;
}

json schema_to_json(const FeatureSchema& schema) {
  json out;
  out["id_column"] = schema.id_column;
  out["label_column"] = schema.label_column;
  out["classes"] = schema.classes;
  out["features"] = json::array();
  for (const auto& f : schema.features) {
    json item{{"name", f.name},
              {"label", f.label},
              {"kind", to_string(f.kind)},
              {"encoding", to_string(f.encoding)}};
    if (f.kind == FeatureKind::categorical) item["levels"] = f.levels;
    if (f.kind == FeatureKind::continuous) {
      if (f.bin_edges.empty()) {
        item["bins"] = f.bin_count;
      } else {
        item["bins"] = f.bin_edges;
      }
    }
    out["features"].push_back(std::move(item));
  }
  return out;
}

FeatureSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open schema config " + path.string());
  json config;
  try {
    config = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
  auto schema = schema_from_json(config);
  // A fully declared schema fixes every categorical vocabulary.
  for (auto& f : schema.features) {
    if (f.kind == FeatureKind::categorical && !f.levels.empty()) f.levels_fixed = true;
  }
  return schema;
}

Dataset load_dataset(const std::filesystem::path& path, FeatureSchema schema) {
  schema.validate();
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open dataset " + path.string());

  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::parse_error, path.string() + ": missing header row");
  const auto header = split_csv_line(line);

  std::optional<std::size_t> id_col;
  std::optional<std::size_t> label_col;
  std::vector<std::optional<std::size_t>> feature_col(schema.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == schema.id_column) {
      id_col = c;
    } else if (header[c] == schema.label_column) {
      label_col = c;
    } else if (auto f = schema.find(header[c])) {
      feature_col[*f] = c;
    } else {
      fail(ErrorCode::parse_error, path.string() + ": header column '" + header[c] + "' not in schema");
    }
  }
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (!feature_col[f])
      fail(ErrorCode::parse_error, path.string() + ": header lacks feature '" + schema.features[f].name + "'");
  }
  if (!label_col)
    fail(ErrorCode::parse_error, path.string() + ": header lacks label column '" + schema.label_column + "'");

  Dataset data;
  std::vector<std::string> problems;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      problems.push_back("line " + std::to_string(line_no) + ": expected " +
                         std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
      continue;
    }
    Instance row;
    row.id = id_col ? cells[*id_col] : std::to_string(line_no - 1);
    row.values.resize(schema.size());
    bool ok = true;
    for (std::size_t f = 0; f < schema.size(); ++f) {
      try {
        row.values[f] = schema.parse_value(f, cells[*feature_col[f]]);
      } catch (const Error& e) {
        problems.push_back("line " + std::to_string(line_no) + ", column '" +
                           schema.features[f].name + "': " + e.what());
        ok = false;
      }
    }
    const auto label = std::find(schema.classes.begin(), schema.classes.end(), cells[*label_col]);
    if (label == schema.classes.end()) {
      problems.push_back("line " + std::to_string(line_no) + ", column '" + schema.label_column +
                         "': unknown class '" + cells[*label_col] + "'");
      ok = false;
    } else {
      row.label = static_cast<std::size_t>(label - schema.classes.begin());
    }
    if (ok) data.rows.push_back(std::move(row));
  }

  if (!problems.empty()) {
    std::string message = path.string() + ": " + std::to_string(problems.size()) + " rejected row(s)";
    for (std::size_t i = 0; i < problems.size() && i < 10; ++i) message += "\n  " + problems[i];
    fail(ErrorCode::parse_error, message);
  }
  if (data.rows.empty()) fail(ErrorCode::invalid_argument, path.string() + ": row count >= 1 violated");
  data.schema = std::move(schema);
  return data;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
  const auto& schema = dataset.schema;
  out << schema.id_column;
  for (const auto& f : schema.features) out << ',' << f.name;
  out << ',' << schema.label_column << '\n';
  for (const auto& row : dataset.rows) {
    out << row.id;
    for (std::size_t f = 0; f < schema.size(); ++f) out << ',' << schema.format_value(f, row.values[f]);
    out << ',' << (row.label ? schema.classes[*row.label] : std::string()) << '\n';
  }
}

std::string_view discretize_price(double price) {
  if (!(price >= 0.0)) fail(ErrorCode::invalid_argument, "price must be non-negative");
  if (price < 100000.0) return "Low";
  if (price > 200000.0) return "High";
  return "Medium";
}

void prepare_ames(const std::filesystem::path& raw_csv, const std::filesystem::path& out_csv) {
  std::ifstream in(raw_csv);
  if (!in) fail(ErrorCode::io_error, "cannot open " + raw_csv.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::parse_error, raw_csv.string() + ": empty file");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t, std::less<>> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  const auto need = [&](std::string_view name) {
    const auto it = col.find(name);
    if (it == col.end()) fail(ErrorCode::parse_error, raw_csv.string() + ": missing column '" + std::string(name) + "'");
    return it->second;
  };
  const std::size_t c_order = need("order");
  const std::size_t c_year_built = need("year_built");
  const std::size_t c_year_sold = need("year_sold");
  const std::size_t c_price = need("sale_price");
  const std::vector<std::string> passthrough = {"bedrooms", "central_air", "fireplaces",
                                                "overall_quality", "kitchen_quality",
                                                "overall_condition"};
  std::vector<std::size_t> pass_cols;
  for (const auto& name : passthrough) pass_cols.push_back(need(name));
  const std::size_t c_area = need("living_area");

  std::ofstream out(out_csv);
  if (!out) fail(ErrorCode::io_error, "cannot write " + out_csv.string());
  out << "id";
  for (const auto& name : passthrough) out << ',' << name;
  out << ",age_when_sold,living_area,price_class\n";

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      fail(ErrorCode::parse_error, raw_csv.string() + ": line " + std::to_string(line_no) + " has wrong arity");
    const auto built = parse_number(cells[c_year_built]);
    const auto sold = parse_number(cells[c_year_sold]);
    const auto price = parse_number(cells[c_price]);
    if (!built || !sold || !price)
      fail(ErrorCode::parse_error, raw_csv.string() + ": line " + std::to_string(line_no) + " has a non-numeric year or price");
    out << cells[c_order];
    for (const auto c : pass_cols) out << ',' << cells[c];
    out << ',' << format_number(*sold - *built) << ',' << cells[c_area] << ','
        << discretize_price(*price) << '\n';
  }
}

std::vector<double> quantile_edges(std::vector<double> values, std::size_t bins) {
  std::vector<double> edges;
  if (values.empty() || bins < 2) return edges;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  for (std::size_t k = 1; k < bins; ++k) {
    const double edge = values[k * n / bins];
    if (edge > values.front() && (edges.empty() || edge > edges.back())) edges.push_back(edge);
  }
  return edges;
}

Split split(const Dataset& dataset, double ratio, std::uint32_t seed, bool stratify) {
  if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorCode::invalid_argument, "split ratio must lie in (0, 1)");
  const std::size_t n = dataset.size();
  LegacyRandom rng(seed);
  const auto perm = rng.permutation(n);

  std::vector<std::size_t> test_idx;
  std::vector<std::size_t> train_idx;
  if (!stratify) {
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    const std::size_t n_test = n - n_train;
    test_idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  } else {
    // Per class: the permutation order restricted to that class, cut the
    // same way as the unstratified split.
    std::vector<std::vector<std::size_t>> by_class(dataset.schema.class_count());
    for (const auto i : perm) by_class[dataset.rows[i].label.value_or(0)].push_back(i);
    for (const auto& members : by_class) {
      const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(members.size())));
      const std::size_t n_test = members.size() - n_train;
      test_idx.insert(test_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
      train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
    }
  }

  Split out;
  out.train.schema = dataset.schema;
  for (const auto i : train_idx) out.train.rows.push_back(dataset.rows[i]);
  for (std::size_t f = 0; f < out.train.schema.size(); ++f) {
    auto& spec = out.train.schema.features[f];
    if (spec.kind != FeatureKind::continuous || !spec.bin_edges.empty()) continue;
    std::vector<double> values;
    values.reserve(out.train.size());
    for (const auto& row : out.train.rows) values.push_back(row.values[f]);
    spec.bin_edges = quantile_edges(std::move(values), spec.bin_count);
    if (spec.bin_edges.empty()) {
      // Degenerate column: one bin holding everything.
      spec.bin_edges.push_back(std::numeric_limits<double>::max());
    }
  }
  out.test.schema = out.train.schema;
  for (const auto i : test_idx) out.test.rows.push_back(dataset.rows[i]);
  return out;
}

bool matches(const FeatureSchema& schema, const Instance& row, const Instance& source,
             const Argument& argument) {
  for (const auto f : argument) {
    if (schema.features[f].kind == FeatureKind::continuous) {
      if (schema.bin_of(f, row.values[f]) != schema.bin_of(f, source.values[f])) return false;
    } else if (row.values[f] != source.values[f]) {
      return false;
    }
  }
  return true;
}

namespace {

void check_argument(const FeatureSchema& schema, const Instance& source, const Argument& argument) {
  if (source.values.size() != schema.size())
    fail(ErrorCode::invalid_argument, "instance arity does not match schema");
  for (const auto f : argument) {
    if (f >= schema.size()) fail(ErrorCode::not_found, "argument feature index out of range");
  }
}

}  // namespace

EmpiricalEstimate empirical_confidence(const Dataset& train, std::size_t decision,
                                       const Instance& source, const Argument& argument,
                                       std::size_t min_support) {
  check_argument(train.schema, source, argument);
  if (decision >= train.schema.class_count()) fail(ErrorCode::not_found, "unknown class index");
  EmpiricalEstimate estimate;
  std::size_t hits = 0;
  for (const auto& row : train.rows) {
    if (!matches(train.schema, row, source, argument)) continue;
    ++estimate.support;
    if (row.label == decision) ++hits;
  }
  if (estimate.support > 0 && estimate.support >= min_support) {
    estimate.probability = static_cast<double>(hits) / static_cast<double>(estimate.support);
  }
  return estimate;
}

std::vector<std::size_t> sample_rows(const Dataset& train, const Instance& source,
                                     const Argument& argument, std::size_t count,
                                     std::uint64_t seed, SamplingMode mode) {
  check_argument(train.schema, source, argument);
  if (mode == SamplingMode::exhaustive) {
    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  if (count < 1) fail(ErrorCode::invalid_argument, "sample count must be >= 1");

  std::vector<std::size_t> pool;
  if (mode == SamplingMode::conditional) {
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (matches(train.schema, train.rows[i], source, argument)) pool.push_back(i);
    }
    if (pool.empty()) fail(ErrorCode::not_found, "no training rows match the argument");
  }
  const std::size_t population = mode == SamplingMode::conditional ? pool.size() : train.size();

  std::mt19937_64 engine(seed);
  std::vector<std::size_t> rows(count);
  for (auto& r : rows) {
    const std::size_t pick = uniform_index(engine, population);
    r = mode == SamplingMode::conditional ? pool[pick] : pick;
  }
  return rows;
}

std::vector<std::vector<double>> sample_background(const Dataset& train, const Instance& source,
                                                   const Argument& argument, std::size_t count,
                                                   std::uint64_t seed, SamplingMode mode) {
  const auto rows = sample_rows(train, source, argument, count, seed, mode);
  std::vector<std::vector<double>> completions;
  completions.reserve(rows.size());
  for (const auto r : rows) {
    std::vector<double> slice;
    for (std::size_t f = 0; f < train.schema.size(); ++f) {
      if (!argument.contains(f)) slice.push_back(train.rows[r].values[f]);
    }
    completions.push_back(std::move(slice));
  }
  return completions;
}

}  // namespace aact
