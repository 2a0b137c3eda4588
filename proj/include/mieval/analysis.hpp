#pragma once

// The statistical analysis applied to every (complete, imputed or weighted)
// dataset: binarize the predictors, then fit one model per outcome.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mieval/estimators.hpp"
#include "mieval/tabular.hpp"

namespace mieval {

struct OutcomeModel {
  std::string name;
  bool survival = false;  // Cox on (<name>_time, <name>); logistic on <name> otherwise
};

/// Outcomes declared by the dataset roles: binary outcome columns and
/// survival event columns, in column order.
std::vector<OutcomeModel> outcomes_of(const Dataset& ds);

/// Predictor columns of a binarized dataset, in column order.
std::vector<std::string> predictor_names(const Dataset& binarized);

/// Fits one outcome model on the named predictors. Predictors missing from
/// the dataset are an error; so are missing cells in any used column.
EstimateVector fit_outcome(const Dataset& binarized, const OutcomeModel& outcome,
                           const std::vector<std::string>& predictors, const Eigen::VectorXd* weights = nullptr,
                           const FitOptions& opts = {});

}  // namespace mieval
