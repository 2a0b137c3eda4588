#pragma once

// Missingness-mechanism diagnostics.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mieval/tabular.hpp"

namespace mieval {

struct McarTestResult {
  double d2 = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  std::size_t n_patterns = 0;
  std::vector<std::string> flags;
};

nlohmann::json to_json(const McarTestResult& r);

/// Little's chi-square test on a numeric matrix with NaN for missing entries.
McarTestResult little_mcar_test(const Eigen::MatrixXd& Y);

/// Runs on the binarized representation of the predictors and outcomes.
McarTestResult little_mcar_test(const Dataset& ds);

}  // namespace mieval
