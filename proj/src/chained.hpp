#pragma once

// Chained-equations sweep shared by the FCS and forest imputers.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mieval/imputation.hpp"

namespace mieval::detail {

struct ChainSettings {
  VisitOrder order = VisitOrder::monotone;
  int max_iter = 21;
  double early_stop_tol = 1e-4;
};

/// Draws imputations for the missing rows of one column. X carries an
/// intercept in column 0 followed by every other model column.
using Univariate = std::function<Eigen::VectorXd(std::size_t column, const Eigen::VectorXd& y_obs,
                                                 const Eigen::MatrixXd& X_obs, const Eigen::MatrixXd& X_mis, Rng& rng,
                                                 std::vector<std::string>& flags)>;

struct ChainResult {
  std::vector<std::vector<double>> values;  // working scale, every column
  std::vector<std::vector<double>> mean_trace;  // per sweep: imputed-value means per incomplete column
  int sweeps = 0;
};

ChainResult run_chain(const ImputationFrame& frame, const ChainSettings& settings, const Univariate& draw, Rng& rng,
                      std::vector<std::string>& flags);

}  // namespace mieval::detail
