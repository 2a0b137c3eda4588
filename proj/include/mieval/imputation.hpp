#pragma once

// Pieces shared by the imputers: the imputed-set type, the working
// representation of a dataset, initial fill and the univariate draws.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mieval/rng.hpp"
#include "mieval/tabular.hpp"

namespace mieval {

enum class VisitOrder { monotone, revmonotone };

VisitOrder visit_order_from_string(const std::string& s);
std::string_view to_string(VisitOrder order);

struct ImputedSet {
  int index = 1;  // 1-based imputation index
  Dataset dataset;
  std::vector<std::string> flags;
};

/// A dataset prepared for imputation. `work` is the encoded dataset with
/// log-transformed numerics on the log scale; `source` is the encoded
/// dataset on the original scale.
struct ImputationFrame {
  Dataset source;
  Dataset work;
  std::vector<std::size_t> model_columns;  // columns entering the models
  std::vector<std::size_t> incomplete;     // model columns with missing cells
};

/// Throws Error(invalid_input) when a column with missing cells is outside
/// the model (an id column, or an outcome when outcomes are excluded) or has
/// no observed value.
ImputationFrame make_frame(const Dataset& ds, bool include_outcomes, bool one_hot_numeric_bins,
                           bool one_hot_categorical);

/// Completed dataset from working-scale column values. Observed cells are
/// copied from `frame.source`; imputed cells are back-transformed. Columns
/// listed in `fuzzy` hold real-valued imputations and become numeric.
Dataset assemble(const ImputationFrame& frame, const std::vector<std::vector<double>>& values,
                 const std::vector<std::uint8_t>& fuzzy);

/// Missing numeric cells take the observed mean, binary and categorical cells
/// the observed mode (ties to the first-declared level).
Dataset initial_fill(const Dataset& ds);

/// Predictive mean matching, Type-1: donors matched on β̂ predictions,
/// recipients on β* predictions; returns observed y values of random donors
/// among the k nearest.
Eigen::VectorXd impute_pmm(const Eigen::VectorXd& y_obs, const Eigen::MatrixXd& X_obs, const Eigen::MatrixXd& X_mis,
                           int k, Rng& rng);

/// Bayesian linear regression draw.
Eigen::VectorXd impute_norm(const Eigen::VectorXd& y_obs, const Eigen::MatrixXd& X_obs, const Eigen::MatrixXd& X_mis,
                            Rng& rng);

/// Logistic regression draw. Falls back to a 1e-4 ridge penalty on
/// separation and appends "logreg_ridge" to `flags`.
Eigen::VectorXd impute_logreg(const Eigen::VectorXd& y_obs, const Eigen::MatrixXd& X_obs, const Eigen::MatrixXd& X_mis,
                              Rng& rng, std::vector<std::string>* flags = nullptr);

/// Multinomial logistic draw over categories 0..n_categories-1 (reference =
/// largest observed category).
Eigen::VectorXd impute_polyreg(const Eigen::VectorXd& y_obs, int n_categories, const Eigen::MatrixXd& X_obs,
                               const Eigen::MatrixXd& X_mis, Rng& rng, std::vector<std::string>* flags = nullptr);

/// Draw from a chi-square distribution.
double chi_square_draw(double df, Rng& rng);

/// Linear least squares with a 1e-8 ridge. Returns β̂ and the Cholesky factor
/// of XᵀX + ridge·I.
struct LinearFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd chol_lower;
  double rss = 0.0;
};
LinearFit fit_linear(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double ridge = 1e-8);

}  // namespace mieval
