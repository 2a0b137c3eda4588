#pragma once

// Synthetic cohorts with planted outcome models.
//
// Predictors share a latent Gaussian copula; each latent coordinate is pushed
// through the inverse CDF of its marginal. Outcomes are drawn from logistic
// models and an exponential proportional-hazards model whose coefficients are
// indexed by the binarized predictor names.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mieval/tabular.hpp"

namespace mieval {

enum class MarginalType { binned, normal, binary, categorical };

struct PredictorSpec {
  std::string name;
  MarginalType marginal = MarginalType::binary;
  // binned: cut points, one probability per bin, support [lo, hi]
  std::vector<double> bins;
  std::vector<double> probs;
  double lo = 0.0, hi = 1.0;
  // normal
  double mean = 0.0, sd = 1.0;
  // binary: P(x = 1)
  double p = 0.5;
  // categorical
  std::vector<std::string> categories;
  std::string reference;  // binned or categorical; required
  bool log_transform = false;
};

enum class OutcomeType { logistic, survival };

struct OutcomeSpec {
  std::string name;
  OutcomeType type = OutcomeType::logistic;
  double intercept = 0.0;       // logistic
  double baseline_rate = 0.1;   // survival
  double censor_time = 1.0;     // survival: administrative horizon
  std::map<std::string, double> coefficients;  // binarized name -> value; absent = 0
};

struct CohortSpec {
  std::vector<PredictorSpec> predictors;
  std::vector<OutcomeSpec> outcomes;
  // Latent correlation: either a full matrix, or factor loadings
  // (predictor x factor) giving R = L Lᵀ + diag(1 - rowsum(L²)).
  Eigen::MatrixXd correlation;
  Eigen::MatrixXd loadings;
  std::size_t n = 1000;
  std::uint64_t seed = 1;

  /// Latent correlation actually used.
  Eigen::MatrixXd latent_correlation() const;
};

struct OutcomeTruth {
  std::string name;
  OutcomeType type = OutcomeType::logistic;
  std::vector<std::string> names;  // binarized predictors
  Eigen::VectorXd beta;
  double intercept = 0.0;
};

struct GroundTruth {
  std::vector<OutcomeTruth> outcomes;
  const OutcomeTruth& outcome(const std::string& name) const;
};

nlohmann::json to_json(const GroundTruth& truth);

CohortSpec cohort_spec_from_json(const nlohmann::json& j);
nlohmann::json cohort_spec_to_json(const CohortSpec& spec);
CohortSpec load_cohort_spec(const std::string& path);

/// Column schema of a generated cohort (predictors, then outcomes).
std::vector<ColumnSpec> cohort_schema(const CohortSpec& spec);

/// Binarized predictor names in estimation order.
std::vector<std::string> binarized_names(const std::vector<ColumnSpec>& schema);

/// Column names for a survival outcome: (time, event).
std::pair<std::string, std::string> survival_columns(const std::string& outcome);

/// Throws Error(config) on an invalid spec, Error(invalid_input) if the
/// correlation is not positive definite.
std::pair<Dataset, GroundTruth> generate_cohort(const CohortSpec& spec, int threads = 1);

/// Table 1-shaped default: 24 predictors (38 binarized), two binary outcomes
/// (hospitalization, ventilation) and one survival outcome (death).
CohortSpec default_cohort_spec(std::size_t n = 4000, std::uint64_t seed = 1);

/// Three correlated standard-normal predictors x1..x3 with one binary
/// outcome; used for calibration runs.
CohortSpec gaussian_cohort_spec(std::size_t n, std::uint64_t seed, double rho = 0.5);

}  // namespace mieval
