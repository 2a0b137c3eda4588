#pragma once

// Mixed-type dataset model and the transforms every other module consumes.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mieval {

enum class Kind { numeric, binary, categorical };
enum class Role { predictor, outcome, survival_time, survival_event, id };

std::string_view to_string(Kind kind);
std::string_view to_string(Role role);
Kind kind_from_string(std::string_view s);
Role role_from_string(std::string_view s);

struct ColumnSpec {
  std::string name;
  Kind kind = Kind::numeric;
  Role role = Role::predictor;
  std::vector<double> bins;             // numeric: ordered cut points
  std::vector<std::string> categories;  // categorical: declared labels
  std::optional<std::string> reference_category;
  bool log_transform = false;
  // Set on indicator columns produced by one_hot: the source variable.
  std::string indicator_of;

  bool operator==(const ColumnSpec&) const = default;
};

/// One column of cell values. Categorical cells hold the category index.
/// Masked cells hold NaN and must never be read as values.
struct Column {
  ColumnSpec spec;
  std::vector<double> values;
  std::vector<std::uint8_t> missing;

  std::size_t missing_count() const;
  bool operator==(const Column&) const;
};

class Dataset {
 public:
  Dataset() = default;
  /// Validates every invariant; throws Error(invalid_input) on violation.
  explicit Dataset(std::vector<Column> columns);

  std::size_t rows() const { return columns_.empty() ? 0 : columns_.front().values.size(); }
  std::size_t cols() const { return columns_.size(); }

  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t j) const { return columns_.at(j); }
  const Column& column(std::string_view name) const;
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  bool is_missing(std::size_t row, std::size_t col) const { return columns_[col].missing[row] != 0; }
  std::optional<double> cell(std::size_t row, std::size_t col) const;

  std::vector<ColumnSpec> schema() const;
  std::vector<std::size_t> with_role(Role role) const;
  std::size_t missing_cells() const;
  bool complete() const { return missing_cells() == 0; }
  std::vector<std::uint8_t> complete_rows() const;

  /// Rows selected by index, in the given order.
  Dataset select_rows(const std::vector<std::size_t>& rows) const;

  /// Copy with column j replaced.
  Dataset with_column(std::size_t j, Column column) const;

  bool operator==(const Dataset& other) const { return columns_ == other.columns_; }

 private:
  std::vector<Column> columns_;
};

struct PatternEntry {
  std::vector<std::string> variables;  // empty = complete rows
  std::size_t count = 0;
  double percent = 0.0;
};

struct PatternTable {
  std::vector<PatternEntry> entries;  // sorted by count, descending
  std::size_t n = 0;
  std::size_t complete = 0;
  std::size_t incomplete = 0;
};

// --- I/O -------------------------------------------------------------------

nlohmann::json schema_to_json(const std::vector<ColumnSpec>& schema);
std::vector<ColumnSpec> schema_from_json(const nlohmann::json& j);
std::vector<ColumnSpec> load_schema(const std::string& path);
void save_schema(const std::vector<ColumnSpec>& schema, const std::string& path);

/// RFC 4180 CSV with a header row; an empty field is a missing cell.
Dataset read_csv(std::istream& in, const std::vector<ColumnSpec>& schema);
Dataset load_csv(const std::string& path, const std::vector<ColumnSpec>& schema);
void write_csv(const Dataset& ds, std::ostream& out);
void save_csv(const Dataset& ds, const std::string& path);

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double x);

// --- transforms ------------------------------------------------------------

/// Labels of the bins of a numeric column, e.g. "BMI<20", "20≤BMI<25", "BMI≥40".
std::vector<std::string> bin_labels(const ColumnSpec& spec);
/// Index of the left-closed/right-open bin containing x.
std::size_t bin_index(const std::vector<double>& cuts, double x);

Dataset bin_numeric(const Dataset& ds, std::string_view var);
Dataset one_hot(const Dataset& ds, std::string_view var);
Dataset listwise_delete(const Dataset& ds);
PatternTable pattern_summary(const Dataset& ds);

/// How real-valued imputations of indicator columns enter estimation.
enum class FuzzyMode { threshold, as_is };

/// Bins and one-hot encodes every non-binary predictor. Numeric indicator
/// columns (fuzzy imputations) are thresholded at 0.5 or kept as-is;
/// numeric predictors without bins pass through unchanged.
Dataset binarize_for_estimation(const Dataset& ds, FuzzyMode fuzzy = FuzzyMode::threshold);

/// Freeze reference categories (largest observed group) for categorical and
/// binned numeric predictors that do not declare one.
Dataset resolve_references(const Dataset& ds);

/// Representation an imputer works on: optionally one-hot binned numerics
/// and/or categorical predictors.
Dataset encode_for_imputation(const Dataset& ds, bool one_hot_numeric_bins, bool one_hot_categorical);

/// Name of the indicator column for a level of a variable.
std::string indicator_name(std::string_view var, std::string_view level);

}  // namespace mieval
