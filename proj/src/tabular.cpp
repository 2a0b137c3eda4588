#include "mieval/tabular.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "mieval/error.hpp"

namespace mieval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void invalid(const std::string& what) { fail(ErrorKind::invalid_input, what); }

}  // namespace

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::numeric: return "numeric";
    case Kind::binary: return "binary";
    case Kind::categorical: return "categorical";
  }
  return "?";
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::predictor: return "predictor";
    case Role::outcome: return "outcome";
    case Role::survival_time: return "survival_time";
    case Role::survival_event: return "survival_event";
    case Role::id: return "id";
  }
  return "?";
}

Kind kind_from_string(std::string_view s) {
  if (s == "numeric") return Kind::numeric;
  if (s == "binary") return Kind::binary;
  if (s == "categorical") return Kind::categorical;
  invalid("unknown column kind '" + std::string(s) + "'");
}

Role role_from_string(std::string_view s) {
  if (s == "predictor") return Role::predictor;
  if (s == "outcome") return Role::outcome;
  if (s == "survival_time") return Role::survival_time;
  if (s == "survival_event") return Role::survival_event;
  if (s == "id") return Role::id;
  invalid("unknown column role '" + std::string(s) + "'");
}

std::size_t Column::missing_count() const {
  return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), std::uint8_t{1}));
}

bool Column::operator==(const Column& other) const {
  if (!(spec == other.spec) || missing != other.missing || values.size() != other.values.size()) return false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (missing[i]) continue;
    if (std::bit_cast<std::uint64_t>(values[i]) != std::bit_cast<std::uint64_t>(other.values[i])) return false;
  }
  return true;
}

// --- Dataset -----------------------------------------------------------------

Dataset::Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
  if (columns_.empty()) invalid("dataset needs at least one column");
  const std::size_t n = columns_.front().values.size();
  if (n == 0) invalid("dataset needs at least one row");
  std::set<std::string> names;
  int times = 0, events = 0;
  for (auto& col : columns_) {
    const auto& spec = col.spec;
    if (!names.insert(spec.name).second) invalid("duplicate column '" + spec.name + "'");
    if (col.values.size() != n) invalid("column '" + spec.name + "' has a different row count");
    if (col.missing.empty()) col.missing.assign(n, 0);
    if (col.missing.size() != n) invalid("mask of column '" + spec.name + "' has a different row count");
    if (!std::is_sorted(spec.bins.begin(), spec.bins.end(), std::less_equal<>()) ||
        std::adjacent_find(spec.bins.begin(), spec.bins.end()) != spec.bins.end())
      invalid("bins of '" + spec.name + "' are not strictly increasing");
    if (!spec.bins.empty() && spec.kind != Kind::numeric) invalid("bins declared on non-numeric column '" + spec.name + "'");
    if (spec.kind == Kind::categorical && spec.categories.empty())
      invalid("categorical column '" + spec.name + "' declares no categories");
    if (spec.reference_category) {
      const auto labels = spec.kind == Kind::categorical ? spec.categories : bin_labels(spec);
      if (std::find(labels.begin(), labels.end(), *spec.reference_category) == labels.end())
        invalid("reference category '" + *spec.reference_category + "' not declared for '" + spec.name + "'");
    }
    if (spec.role == Role::survival_time) ++times;
    if (spec.role == Role::survival_event) ++events;
    for (std::size_t i = 0; i < n; ++i) {
      if (col.missing[i]) {
        col.values[i] = kNaN;
        continue;
      }
      const double v = col.values[i];
      if (!std::isfinite(v)) invalid("non-finite value in column '" + spec.name + "'");
      if (spec.kind == Kind::binary && v != 0.0 && v != 1.0) invalid("binary column '" + spec.name + "' holds a non-0/1 value");
      if (spec.kind == Kind::categorical &&
          (v < 0 || v >= static_cast<double>(spec.categories.size()) || v != std::floor(v)))
        invalid("categorical column '" + spec.name + "' holds an undeclared category");
    }
  }
  if (times != events || times > 1) invalid("survival_time and survival_event must appear as a single pair");
}

const Column& Dataset::column(std::string_view name) const { return columns_[index_of(name)]; }

std::optional<std::size_t> Dataset::find(std::string_view name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j)
    if (columns_[j].spec.name == name) return j;
  return std::nullopt;
}

std::size_t Dataset::index_of(std::string_view name) const {
  auto j = find(name);
  if (!j) invalid("unknown column '" + std::string(name) + "'");
  return *j;
}

std::optional<double> Dataset::cell(std::size_t row, std::size_t col) const {
  if (is_missing(row, col)) return std::nullopt;
  return columns_[col].values[row];
}

std::vector<ColumnSpec> Dataset::schema() const {
  std::vector<ColumnSpec> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.spec);
  return out;
}

std::vector<std::size_t> Dataset::with_role(Role role) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < columns_.size(); ++j)
    if (columns_[j].spec.role == role) out.push_back(j);
  return out;
}

std::size_t Dataset::missing_cells() const {
  std::size_t total = 0;
  for (const auto& c : columns_) total += c.missing_count();
  return total;
}

std::vector<std::uint8_t> Dataset::complete_rows() const {
  std::vector<std::uint8_t> ok(rows(), 1);
  for (const auto& c : columns_)
    for (std::size_t i = 0; i < ok.size(); ++i)
      if (c.missing[i]) ok[i] = 0;
  return ok;
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto& c : columns_) {
    Column out{c.spec, {}, {}};
    out.values.reserve(rows.size());
    out.missing.reserve(rows.size());
    for (std::size_t r : rows) {
      out.values.push_back(c.values.at(r));
      out.missing.push_back(c.missing[r]);
    }
    cols.push_back(std::move(out));
  }
  return Dataset(std::move(cols));
}

Dataset Dataset::with_column(std::size_t j, Column column) const {
  std::vector<Column> cols = columns_;
  cols.at(j) = std::move(column);
  return Dataset(std::move(cols));
}

// --- schema JSON -------------------------------------------------------------

nlohmann::json schema_to_json(const std::vector<ColumnSpec>& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& s : schema) {
    nlohmann::json j{{"name", s.name}, {"kind", to_string(s.kind)}, {"role", to_string(s.role)}};
    if (!s.bins.empty()) j["bins"] = s.bins;
    if (!s.categories.empty()) j["categories"] = s.categories;
    if (s.reference_category) j["reference_category"] = *s.reference_category;
    if (s.log_transform) j["log_transform"] = true;
    if (!s.indicator_of.empty()) j["indicator_of"] = s.indicator_of;
    cols.push_back(std::move(j));
  }
  return nlohmann::json{{"columns", cols}};
}

std::vector<ColumnSpec> schema_from_json(const nlohmann::json& j) {
  const auto& cols = j.is_array() ? j : j.at("columns");
  std::vector<ColumnSpec> out;
  try {
    for (const auto& c : cols) {
      ColumnSpec s;
      s.name = c.at("name").get<std::string>();
      s.kind = kind_from_string(c.value("kind", std::string("numeric")));
      s.role = role_from_string(c.value("role", std::string("predictor")));
      if (c.contains("bins")) s.bins = c["bins"].get<std::vector<double>>();
      if (c.contains("categories")) s.categories = c["categories"].get<std::vector<std::string>>();
      if (c.contains("reference_category") && !c["reference_category"].is_null())
        s.reference_category = c["reference_category"].get<std::string>();
      s.log_transform = c.value("log_transform", false);
      s.indicator_of = c.value("indicator_of", std::string());
      if (s.log_transform && s.kind != Kind::numeric) invalid("log_transform on non-numeric column '" + s.name + "'");
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("malformed schema: ") + e.what());
  }
  return out;
}

std::vector<ColumnSpec> load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open schema '" + path + "'");
  try {
    return schema_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    invalid("malformed schema '" + path + "': " + e.what());
  }
}

void save_schema(const std::vector<ColumnSpec>& schema, const std::string& path) {
  std::ofstream out(path);
  out << schema_to_json(schema).dump(2) << '\n';
}

// --- CSV ---------------------------------------------------------------------

namespace {

// Reads one RFC 4180 record. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  char ch;
  while (in.get(ch)) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else if (ch == '\n') {
      break;
    } else {
      field.push_back(ch);
    }
  }
  if (quoted) invalid("unterminated quoted field in CSV");
  fields.push_back(std::move(field));
  return true;
}

void write_field(std::ostream& out, const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

double parse_number(const std::string& text, const std::string& column) {
  double v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    invalid("invalid value '" + text + "' in column '" + column + "'");
  return v;
}

}  // namespace

std::string format_number(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

Dataset read_csv(std::istream& in, const std::vector<ColumnSpec>& schema) {
  std::vector<std::string> header;
  if (!read_record(in, header)) invalid("empty CSV");
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  std::map<std::string, std::size_t> position;
  for (std::size_t k = 0; k < header.size(); ++k) {
    auto it = std::find_if(schema.begin(), schema.end(), [&](const ColumnSpec& s) { return s.name == header[k]; });
    if (it == schema.end()) invalid("unknown column '" + header[k] + "'");
    if (!position.emplace(header[k], k).second) invalid("duplicate column '" + header[k] + "'");
  }
  std::vector<Column> cols;
  std::vector<std::size_t> source;
  for (const auto& s : schema) {
    auto it = position.find(s.name);
    if (it == position.end()) invalid("column '" + s.name + "' missing from CSV header");
    cols.push_back(Column{s, {}, {}});
    source.push_back(it->second);
  }

  std::vector<std::string> fields;
  std::size_t line = 1;
  while (read_record(in, fields)) {
    ++line;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size())
      invalid("CSV line " + std::to_string(line) + " has " + std::to_string(fields.size()) + " fields");
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const std::string& text = fields[source[j]];
      auto& col = cols[j];
      if (text.empty()) {
        col.values.push_back(kNaN);
        col.missing.push_back(1);
        continue;
      }
      double v = 0;
      switch (col.spec.kind) {
        case Kind::numeric: v = parse_number(text, col.spec.name); break;
        case Kind::binary:
          if (text == "0") v = 0;
          else if (text == "1") v = 1;
          else invalid("invalid value '" + text + "' in binary column '" + col.spec.name + "'");
          break;
        case Kind::categorical: {
          const auto& cats = col.spec.categories;
          auto it = std::find(cats.begin(), cats.end(), text);
          if (it == cats.end()) invalid("invalid value '" + text + "': category outside declared set of '" + col.spec.name + "'");
          v = static_cast<double>(it - cats.begin());
          break;
        }
      }
      col.values.push_back(v);
      col.missing.push_back(0);
    }
  }
  return Dataset(std::move(cols));
}

Dataset load_csv(const std::string& path, const std::vector<ColumnSpec>& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) invalid("cannot open '" + path + "'");
  return read_csv(in, schema);
}

void write_csv(const Dataset& ds, std::ostream& out) {
  for (std::size_t j = 0; j < ds.cols(); ++j) {
    if (j) out << ',';
    write_field(out, ds.column(j).spec.name);
  }
  out << '\n';
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    for (std::size_t j = 0; j < ds.cols(); ++j) {
      if (j) out << ',';
      const auto& col = ds.column(j);
      if (col.missing[i]) continue;
      const double v = col.values[i];
      switch (col.spec.kind) {
        case Kind::numeric: out << format_number(v); break;
        case Kind::binary: out << (v != 0.0 ? '1' : '0'); break;
        case Kind::categorical: write_field(out, col.spec.categories[static_cast<std::size_t>(v)]); break;
      }
    }
    out << '\n';
  }
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) invalid("cannot write '" + path + "'");
  write_csv(ds, out);
}

// --- transforms --------------------------------------------------------------

std::vector<std::string> bin_labels(const ColumnSpec& spec) {
  std::vector<std::string> labels;
  const auto& cuts = spec.bins;
  if (cuts.empty()) return labels;
  labels.push_back(spec.name + "<" + format_number(cuts.front()));
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
    labels.push_back(format_number(cuts[k]) + "≤" + spec.name + "<" + format_number(cuts[k + 1]));
  labels.push_back(spec.name + "≥" + format_number(cuts.back()));
  return labels;
}

std::size_t bin_index(const std::vector<double>& cuts, double x) {
  // Number of cuts <= x: left-closed, right-open intervals.
  return static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
}

std::string indicator_name(std::string_view var, std::string_view level) {
  std::string out(var);
  out += '=';
  out += level;
  return out;
}

Dataset bin_numeric(const Dataset& ds, std::string_view var) {
  const std::size_t j = ds.index_of(var);
  const Column& src = ds.column(j);
  if (src.spec.kind != Kind::numeric) invalid("cannot bin non-numeric column '" + src.spec.name + "'");
  if (src.spec.bins.empty()) invalid("bins undeclared for '" + src.spec.name + "'");

  Column out;
  out.spec = src.spec;
  out.spec.kind = Kind::categorical;
  out.spec.categories = bin_labels(src.spec);
  out.spec.bins.clear();
  out.spec.log_transform = false;
  out.missing = src.missing;
  out.values.resize(src.values.size());
  for (std::size_t i = 0; i < src.values.size(); ++i)
    out.values[i] = src.missing[i] ? kNaN : static_cast<double>(bin_index(src.spec.bins, src.values[i]));
  return ds.with_column(j, std::move(out));
}

namespace {

std::vector<std::size_t> category_counts(const Column& col) {
  std::vector<std::size_t> counts(col.spec.categories.size(), 0);
  for (std::size_t i = 0; i < col.values.size(); ++i)
    if (!col.missing[i]) ++counts[static_cast<std::size_t>(col.values[i])];
  return counts;
}

std::size_t reference_index(const Column& col) {
  const auto& cats = col.spec.categories;
  if (col.spec.reference_category) {
    return static_cast<std::size_t>(std::find(cats.begin(), cats.end(), *col.spec.reference_category) - cats.begin());
  }
  const auto counts = category_counts(col);
  // max_element returns the first maximum: ties go to the first-declared category.
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

}  // namespace

Dataset one_hot(const Dataset& ds, std::string_view var) {
  Dataset binned = ds;
  std::size_t j = ds.index_of(var);
  if (ds.column(j).spec.kind == Kind::numeric && !ds.column(j).spec.bins.empty()) binned = bin_numeric(ds, var);
  const Column& src = binned.column(j);
  if (src.spec.kind != Kind::categorical) invalid("one_hot needs a categorical or binned column, got '" + src.spec.name + "'");
  const auto& cats = src.spec.categories;
  if (cats.size() < 2) invalid("one_hot of '" + src.spec.name + "' needs at least 2 categories");
  const std::size_t ref = reference_index(src);

  std::vector<Column> cols;
  for (std::size_t k = 0; k < binned.cols(); ++k) {
    if (k != j) {
      cols.push_back(binned.column(k));
      continue;
    }
    for (std::size_t level = 0; level < cats.size(); ++level) {
      if (level == ref) continue;
      Column ind;
      ind.spec.name = indicator_name(src.spec.name, cats[level]);
      ind.spec.kind = Kind::binary;
      ind.spec.role = src.spec.role;
      ind.spec.indicator_of = src.spec.name;
      ind.missing = src.missing;
      ind.values.resize(src.values.size());
      for (std::size_t i = 0; i < src.values.size(); ++i)
        ind.values[i] = src.missing[i] ? kNaN : (static_cast<std::size_t>(src.values[i]) == level ? 1.0 : 0.0);
      cols.push_back(std::move(ind));
    }
  }
  return Dataset(std::move(cols));
}

Dataset listwise_delete(const Dataset& ds) {
  const auto ok = ds.complete_rows();
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ok.size(); ++i)
    if (ok[i]) keep.push_back(i);
  if (keep.empty()) invalid("no complete cases");
  if (keep.size() == ds.rows()) return ds;
  return ds.select_rows(keep);
}

PatternTable pattern_summary(const Dataset& ds) {
  const std::size_t n = ds.rows();
  std::map<std::vector<std::size_t>, std::size_t> counts;
  std::vector<std::size_t> pattern;
  for (std::size_t i = 0; i < n; ++i) {
    pattern.clear();
    for (std::size_t j = 0; j < ds.cols(); ++j)
      if (ds.is_missing(i, j)) pattern.push_back(j);
    ++counts[pattern];
  }
  PatternTable table;
  table.n = n;
  for (const auto& [cols, count] : counts) {
    PatternEntry e;
    for (std::size_t j : cols) e.variables.push_back(ds.column(j).spec.name);
    e.count = count;
    e.percent = 100.0 * static_cast<double>(count) / static_cast<double>(n);
    if (cols.empty()) table.complete = count;
    else table.incomplete += count;
    table.entries.push_back(std::move(e));
  }
  std::stable_sort(table.entries.begin(), table.entries.end(),
                   [](const PatternEntry& a, const PatternEntry& b) { return a.count > b.count; });
  return table;
}

Dataset binarize_for_estimation(const Dataset& ds, FuzzyMode fuzzy) {
  Dataset out = ds;
  std::vector<std::string> names;
  for (const auto& c : ds.columns()) names.push_back(c.spec.name);
  for (const auto& name : names) {
    const std::size_t j = out.index_of(name);
    const Column& col = out.column(j);
    if (col.spec.role != Role::predictor) continue;
    switch (col.spec.kind) {
      case Kind::binary: break;
      case Kind::categorical: out = one_hot(out, name); break;
      case Kind::numeric:
        if (!col.spec.indicator_of.empty()) {
          if (fuzzy == FuzzyMode::threshold) {
            Column b = col;
            b.spec.kind = Kind::binary;
            for (std::size_t i = 0; i < b.values.size(); ++i)
              if (!b.missing[i]) b.values[i] = b.values[i] >= 0.5 ? 1.0 : 0.0;
            out = out.with_column(j, std::move(b));
          }
        } else if (!col.spec.bins.empty()) {
          out = one_hot(out, name);
        }
        break;
    }
  }
  return out;
}

Dataset resolve_references(const Dataset& ds) {
  std::vector<Column> cols = ds.columns();
  for (auto& col : cols) {
    if (col.spec.role != Role::predictor || col.spec.reference_category) continue;
    if (col.spec.kind == Kind::categorical) {
      col.spec.reference_category = col.spec.categories[reference_index(col)];
    } else if (col.spec.kind == Kind::numeric && !col.spec.bins.empty()) {
      const auto labels = bin_labels(col.spec);
      std::vector<std::size_t> counts(labels.size(), 0);
      for (std::size_t i = 0; i < col.values.size(); ++i)
        if (!col.missing[i]) ++counts[bin_index(col.spec.bins, col.values[i])];
      col.spec.reference_category = labels[static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin())];
    }
  }
  return Dataset(std::move(cols));
}

Dataset encode_for_imputation(const Dataset& ds, bool one_hot_numeric_bins, bool one_hot_categorical) {
  Dataset out = ds;
  for (const auto& c : ds.columns()) {
    if (c.spec.role != Role::predictor) continue;
    if (one_hot_numeric_bins && c.spec.kind == Kind::numeric && !c.spec.bins.empty() && c.spec.indicator_of.empty())
      out = one_hot(out, c.spec.name);
    else if (one_hot_categorical && c.spec.kind == Kind::categorical)
      out = one_hot(out, c.spec.name);
  }
  return out;
}

}  // namespace mieval
