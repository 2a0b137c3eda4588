#pragma once

// Joint multivariate-normal imputation: EM with missing data, bootstrap
// parameter draws, conditional-normal imputation.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mieval/imputation.hpp"

namespace mieval {

struct EmConfig {
  double tol = 1e-6;  // relative change of the observed-data log-likelihood
  int max_iter = 500;
  double ridge_scale = 1e-6;  // times the mean diagonal, only when needed
};

struct MvnFit {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  std::vector<double> loglik_trace;  // observed-data log-likelihood per iterate
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> flags;
};

/// Y holds NaN for missing entries. `counts`, when given, are nonnegative
/// row multiplicities (a bootstrap resample).
MvnFit em_mvn(const Eigen::MatrixXd& Y, const EmConfig& cfg = {}, const Eigen::VectorXd* counts = nullptr);

/// Observed-data log-likelihood of (mu, sigma).
double mvn_observed_loglik(const Eigen::MatrixXd& Y, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                           const Eigen::VectorXd* counts = nullptr);

struct JmConfig {
  bool include_outcomes = true;
  bool one_hot_numeric_bins = false;
  int m = 5;
  std::uint64_t seed = 1;
  EmConfig em;
  int threads = 1;
};

JmConfig jm_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const JmConfig& cfg);

/// Categorical predictors are one-hot encoded; binary and indicator columns
/// are imputed as real numbers ("fuzzy") and become numeric columns.
std::vector<ImputedSet> run_jm_imputer(const Dataset& ds, const JmConfig& cfg);

}  // namespace mieval
