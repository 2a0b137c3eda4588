#pragma once

// Complete-case analysis weighted by the inverse probability of being complete.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mieval/analysis.hpp"
#include "mieval/forest.hpp"

namespace mieval {

enum class ProbModel { logistic, forest };

ProbModel prob_model_from_string(const std::string& s);
std::string_view to_string(ProbModel m);

struct IpwConfig {
  ProbModel prob_model = ProbModel::logistic;
  bool include_outcomes = false;
  bool one_hot_numeric_bins = false;
  std::optional<double> weight_cap_quantile;  // in (0.5, 1]
  ForestParams forest;
  std::uint64_t seed = 1;
};

IpwConfig ipw_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const IpwConfig& cfg);

struct MissingnessModel {
  std::vector<std::uint8_t> complete;  // R_i
  Eigen::VectorXd prob;                // P(R_i = 1 | fully observed columns)
  std::vector<std::string> predictors; // columns of the probability model
  std::vector<std::string> flags;
};

/// The model uses the fully observed predictor columns (and outcome columns
/// when include_outcomes). Forest probabilities are out-of-bag class
/// proportions floored at 1/(2·n_trees). Throws Error(infeasible) with
/// "IPW infeasible" when no fully observed predictor column exists.
MissingnessModel fit_missingness_model(const Dataset& ds, const IpwConfig& cfg);

/// Weights 1/p̂ for the complete rows, capped at the configured quantile of
/// the complete-row weights.
Eigen::VectorXd ipw_weights(const MissingnessModel& model, const IpwConfig& cfg);

/// Weighted fit of one outcome on the complete rows of `ds`. Variance is the
/// robust sandwich; with all weights equal to 1 the unweighted fit is returned.
EstimateVector ipw_estimates(const Dataset& ds, const MissingnessModel& model, const OutcomeModel& outcome,
                             const std::vector<std::string>& predictors, const IpwConfig& cfg,
                             const FitOptions& opts = {});

}  // namespace mieval
