#pragma once

// Small dataset builders shared by the unit tests.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mieval/tabular.hpp"

namespace fixtures {

using mieval::Column;
using mieval::ColumnSpec;
using mieval::Kind;
using mieval::Role;

inline constexpr double NA = std::numeric_limits<double>::quiet_NaN();

inline Column make_column(ColumnSpec spec, const std::vector<double>& values) {
  Column c{std::move(spec), values, std::vector<std::uint8_t>(values.size(), 0)};
  for (std::size_t i = 0; i < values.size(); ++i)
    if (std::isnan(values[i])) c.missing[i] = 1;
  return c;
}

inline Column numeric(const std::string& name, const std::vector<double>& values, std::vector<double> bins = {},
                      Role role = Role::predictor) {
  ColumnSpec s;
  s.name = name;
  s.kind = Kind::numeric;
  s.role = role;
  s.bins = std::move(bins);
  return make_column(std::move(s), values);
}

inline Column binary(const std::string& name, const std::vector<double>& values, Role role = Role::predictor) {
  ColumnSpec s;
  s.name = name;
  s.kind = Kind::binary;
  s.role = role;
  return make_column(std::move(s), values);
}

inline Column categorical(const std::string& name, std::vector<std::string> cats, const std::vector<double>& codes,
                          std::optional<std::string> reference = std::nullopt) {
  ColumnSpec s;
  s.name = name;
  s.kind = Kind::categorical;
  s.categories = std::move(cats);
  s.reference_category = std::move(reference);
  return make_column(std::move(s), codes);
}

/// The missingness structure of the motivating cohort: 56123 rows over
/// (BMI, Race, Ethnicity) with the seven incomplete patterns and their counts.
inline mieval::Dataset pattern_fixture() {
  struct Block {
    bool bmi, race, eth;
    std::size_t count;
  };
  const std::vector<Block> blocks{{false, false, false, 32529}, {true, false, false, 9993}, {false, true, false, 4951},
                                  {false, false, true, 1226},   {true, true, false, 2159},  {true, false, true, 3732},
                                  {false, true, true, 910},     {true, true, true, 623}};
  std::vector<double> bmi, race, eth;
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b.count; ++i) {
      bmi.push_back(b.bmi ? NA : 30.0);
      race.push_back(b.race ? NA : 0.0);
      eth.push_back(b.eth ? NA : 1.0);
    }
  }
  return mieval::Dataset({numeric("BMI", bmi, {20, 25, 30, 35, 40}),
                          categorical("Race", {"White", "Black", "Asian", "Other"}, race),
                          categorical("Ethnicity", {"Hispanic", "NotHispanic"}, eth)});
}

}  // namespace fixtures
