#pragma once

// Numeric design matrices from Dataset columns. Categorical columns expand to
// dummies for every non-reference level; masked cells become NaN.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mieval/tabular.hpp"

namespace mieval {

struct DesignTerm {
  std::size_t column = 0;
  int level = -1;  // category index for a dummy, -1 for the raw value
  std::string name;
};

/// Terms for the given dataset columns, in order.
std::vector<DesignTerm> design_terms(const Dataset& ds, const std::vector<std::size_t>& columns);

/// Rows x (intercept + terms) matrix. Column 0 is all ones when `intercept`.
Eigen::MatrixXd design_matrix(const Dataset& ds, const std::vector<DesignTerm>& terms,
                              const std::vector<std::size_t>& rows, bool intercept);

/// Same, over all rows.
Eigen::MatrixXd design_matrix(const Dataset& ds, const std::vector<DesignTerm>& terms, bool intercept);

/// Rows of column `col` that are observed / missing.
std::vector<std::size_t> observed_rows(const Dataset& ds, std::size_t col);
std::vector<std::size_t> missing_rows(const Dataset& ds, std::size_t col);

}  // namespace mieval
