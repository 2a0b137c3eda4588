#pragma once

// Logistic regression and Cox proportional hazards, each returning
// per-predictor estimates with variance, standard error and Wald interval.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <json.hpp>

namespace mieval {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// q ± quantile·se; t(df) quantile when df is given and finite, normal otherwise.
Interval wald_ci(double q, double se, std::optional<double> df = std::nullopt, double level = 0.95);

struct EstimateVector {
  std::vector<std::string> names;
  Eigen::VectorXd q;
  Eigen::VectorXd var;
  Eigen::VectorXd se;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::size_t n_used = 0;
  bool weights_applied = false;
  int iterations = 0;
  std::vector<std::string> flags;

  std::size_t size() const { return names.size(); }
};

nlohmann::json to_json(const EstimateVector& e);

struct FitOptions {
  int max_iter = 100;
  double tol = 1e-8;      // infinity norm of the score
  double ridge = 1e-8;    // added to the information matrix when solving
  double level = 0.95;
};

/// Raw IRLS / Newton result for a logistic model whose design already holds
/// any intercept column. `penalty` > 0 adds ½·penalty·‖β‖² on all but column 0.
struct LogisticFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd information;  // Xᵀ W X (+ penalty)
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

LogisticFit logistic_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd* weights,
                          double penalty = 0.0, const FitOptions& opts = {});

/// Weighted logistic log-likelihood and score at beta (design as given).
double logistic_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd* weights,
                       const Eigen::VectorXd& beta, Eigen::VectorXd* score = nullptr);

/// Logistic regression of binary y on X plus an intercept. The returned vector
/// covers the columns of X only; the intercept is in `flags`-free fields below.
struct LogisticResult {
  EstimateVector estimates;
  double intercept = 0.0;
  double intercept_se = 0.0;
  Eigen::VectorXd fitted;  // p̂ per row
};

/// With weights, the variance is the robust sandwich.
/// Throws Error(numerical) on separation, listing the offending columns.
LogisticResult fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const std::vector<std::string>& names, const Eigen::VectorXd* weights = nullptr,
                            const FitOptions& opts = {});

/// Breslow partial likelihood with its score and information.
struct CoxValue {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
};

CoxValue cox_breslow(const Eigen::MatrixXd& X, const Eigen::VectorXd& time, const Eigen::VectorXd& event,
                     const Eigen::VectorXd* weights, const Eigen::VectorXd& beta);

/// Cox proportional hazards by Newton-Raphson on the Breslow partial
/// likelihood. Covariates constant over all rows, or over the event rows, are
/// flagged "non_identifiable:<name>" and reported as NaN.
EstimateVector fit_cox(const Eigen::MatrixXd& X, const Eigen::VectorXd& time, const Eigen::VectorXd& event,
                       const std::vector<std::string>& names, const Eigen::VectorXd* weights = nullptr,
                       const FitOptions& opts = {});

}  // namespace mieval
