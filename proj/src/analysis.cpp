#include "mieval/analysis.hpp"

#include "mieval/error.hpp"
#include "mieval/synth.hpp"

namespace mieval {

std::vector<OutcomeModel> outcomes_of(const Dataset& ds) {
  std::vector<OutcomeModel> out;
  for (const auto& c : ds.columns()) {
    if (c.spec.role == Role::outcome) {
      if (c.spec.kind != Kind::binary) fail(ErrorKind::invalid_input, "outcome '" + c.spec.name + "' is not binary");
      out.push_back({c.spec.name, false});
    } else if (c.spec.role == Role::survival_event) {
      out.push_back({c.spec.name, true});
    }
  }
  return out;
}

std::vector<std::string> predictor_names(const Dataset& binarized) {
  std::vector<std::string> out;
  for (const auto& c : binarized.columns())
    if (c.spec.role == Role::predictor) out.push_back(c.spec.name);
  return out;
}

namespace {

Eigen::VectorXd column_vector(const Dataset& ds, const std::string& name) {
  const auto idx = ds.find(name);
  if (!idx) fail(ErrorKind::invalid_input, "column '" + name + "' not in dataset");
  const Column& c = ds.column(*idx);
  if (c.missing_count() > 0) fail(ErrorKind::invalid_input, "column '" + name + "' is not complete");
  return Eigen::Map<const Eigen::VectorXd>(c.values.data(), static_cast<Eigen::Index>(c.values.size()));
}

}  // namespace

EstimateVector fit_outcome(const Dataset& binarized, const OutcomeModel& outcome,
                           const std::vector<std::string>& predictors, const Eigen::VectorXd* weights,
                           const FitOptions& opts) {
  const auto n = static_cast<Eigen::Index>(binarized.rows());
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(predictors.size()));
  for (std::size_t k = 0; k < predictors.size(); ++k) {
    const auto idx = binarized.find(predictors[k]);
    if (!idx) fail(ErrorKind::invalid_input, "predictor '" + predictors[k] + "' not in dataset");
    if (binarized.column(*idx).spec.kind == Kind::categorical)
      fail(ErrorKind::invalid_input, "predictor '" + predictors[k] + "' is not binarized");
    X.col(static_cast<Eigen::Index>(k)) = column_vector(binarized, predictors[k]);
  }
  if (outcome.survival) {
    const auto [time_name, event_name] = survival_columns(outcome.name);
    return fit_cox(X, column_vector(binarized, time_name), column_vector(binarized, event_name), predictors, weights,
                   opts);
  }
  return fit_logistic(X, column_vector(binarized, outcome.name), predictors, weights, opts).estimates;
}

}  // namespace mieval
