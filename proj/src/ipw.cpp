#include "mieval/ipw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mieval/design.hpp"
#include "mieval/error.hpp"
#include "mieval/stats.hpp"

namespace mieval {

ProbModel prob_model_from_string(const std::string& s) {
  if (s == "logistic") return ProbModel::logistic;
  if (s == "forest") return ProbModel::forest;
  fail(ErrorKind::config, "unknown probability model '" + s + "'");
}

std::string_view to_string(ProbModel m) { return m == ProbModel::logistic ? "logistic" : "forest"; }

namespace {

void validate(const IpwConfig& c) {
  if (c.weight_cap_quantile && !(*c.weight_cap_quantile > 0.5 && *c.weight_cap_quantile <= 1.0))
    fail(ErrorKind::config, "weight_cap_quantile must lie in (0.5, 1]");
}

bool is_outcome_role(Role r) { return r == Role::outcome || r == Role::survival_time || r == Role::survival_event; }

}  // namespace

IpwConfig ipw_config_from_json(const nlohmann::json& j) {
  IpwConfig c;
  try {
    c.prob_model = prob_model_from_string(j.value("prob_model", std::string("logistic")));
    c.include_outcomes = j.value("include_outcomes", c.include_outcomes);
    c.one_hot_numeric_bins = j.value("one_hot_numeric_bins", c.one_hot_numeric_bins);
    if (j.contains("weight_cap_quantile") && !j["weight_cap_quantile"].is_null())
      c.weight_cap_quantile = j["weight_cap_quantile"].get<double>();
    c.forest.n_trees = j.value("n_trees", c.forest.n_trees);
    c.forest.min_leaf = j.value("min_leaf", c.forest.min_leaf);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("ipw config: ") + e.what());
  }
  validate(c);
  return c;
}

nlohmann::json to_json(const IpwConfig& c) {
  nlohmann::json j{{"prob_model", to_string(c.prob_model)},
                   {"include_outcomes", c.include_outcomes},
                   {"one_hot_numeric_bins", c.one_hot_numeric_bins},
                   {"weight_cap_quantile", nullptr}};
  if (c.weight_cap_quantile) j["weight_cap_quantile"] = *c.weight_cap_quantile;
  if (c.prob_model == ProbModel::forest) {
    j["n_trees"] = c.forest.n_trees;
    j["min_leaf"] = c.forest.min_leaf;
  }
  return j;
}

MissingnessModel fit_missingness_model(const Dataset& ds, const IpwConfig& cfg) {
  validate(cfg);
  const std::size_t n = ds.rows();
  MissingnessModel model;
  model.complete = ds.complete_rows();
  std::size_t n_complete = 0;
  for (auto r : model.complete) n_complete += r;
  if (n_complete == 0) fail(ErrorKind::infeasible, "IPW infeasible: no complete rows");
  if (n_complete == n) {
    model.prob = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
    return model;
  }

  const Dataset enc = encode_for_imputation(ds, cfg.one_hot_numeric_bins, false);
  std::vector<std::size_t> cols;
  bool any_predictor = false;
  for (std::size_t j = 0; j < enc.cols(); ++j) {
    const auto& c = enc.column(j);
    if (c.missing_count() > 0) continue;
    const bool use = c.spec.role == Role::predictor || (cfg.include_outcomes && is_outcome_role(c.spec.role));
    if (!use) continue;
    any_predictor = any_predictor || c.spec.role == Role::predictor;
    cols.push_back(j);
  }
  if (!any_predictor) fail(ErrorKind::infeasible, "IPW infeasible: no fully observed predictor columns");

  // Constant design columns carry no information and would make the fit singular.
  const auto all_terms = design_terms(enc, cols);
  const Eigen::MatrixXd full = design_matrix(enc, all_terms, false);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < full.cols(); ++k)
    if (full.col(k).maxCoeff() > full.col(k).minCoeff()) {
      keep.push_back(k);
      model.predictors.push_back(all_terms[static_cast<std::size_t>(k)].name);
    }
  if (keep.empty()) fail(ErrorKind::infeasible, "IPW infeasible: fully observed predictors are constant");
  Eigen::MatrixXd X(full.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) X.col(static_cast<Eigen::Index>(k)) = full.col(keep[k]);
  Eigen::VectorXd r(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) r[static_cast<Eigen::Index>(i)] = model.complete[i];

  if (cfg.prob_model == ProbModel::logistic) {
    Eigen::MatrixXd Xi(X.rows(), X.cols() + 1);
    Xi.col(0).setOnes();
    Xi.rightCols(X.cols()) = X;
    LogisticFit fit = logistic_irls(Xi, r, nullptr);
    if (!fit.converged || !fit.beta.allFinite()) {
      fit = logistic_irls(Xi, r, nullptr, 1e-4);
      model.flags.push_back("ipw_ridge");
    }
    const Eigen::VectorXd eta = Xi * fit.beta;
    model.prob = eta.unaryExpr([](double e) { return stats::logistic(e); });
  } else {
    const Forest f = fit_forest(X, r, ForestKind::classification, cfg.forest, derive_seed(cfg.seed, {0x1f3}), 2);
    const double floor = 1.0 / (2.0 * cfg.forest.n_trees);
    model.prob = f.oob_proba().col(1).cwiseMax(floor);
  }
  for (Eigen::Index i = 0; i < model.prob.size(); ++i)
    if (!(model.prob[i] > 0)) {
      model.prob[i] = std::numeric_limits<double>::min();
      model.flags.push_back("ipw_zero_probability");
    }
  return model;
}

Eigen::VectorXd ipw_weights(const MissingnessModel& model, const IpwConfig& cfg) {
  validate(cfg);
  std::vector<double> w;
  for (std::size_t i = 0; i < model.complete.size(); ++i)
    if (model.complete[i]) w.push_back(1.0 / model.prob[static_cast<Eigen::Index>(i)]);
  Eigen::VectorXd out = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  if (cfg.weight_cap_quantile && !w.empty()) {
    // Linear interpolation between order statistics.
    std::vector<double> sorted = w;
    std::sort(sorted.begin(), sorted.end());
    const double h = (static_cast<double>(sorted.size()) - 1.0) * *cfg.weight_cap_quantile;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double cap = sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    out = out.cwiseMin(cap);
  }
  if (!out.allFinite()) fail(ErrorKind::numerical, "IPW weights are not finite");
  return out;
}

EstimateVector ipw_estimates(const Dataset& ds, const MissingnessModel& model, const OutcomeModel& outcome,
                             const std::vector<std::string>& predictors, const IpwConfig& cfg, const FitOptions& opts) {
  if (model.complete.size() != ds.rows()) fail(ErrorKind::invalid_input, "ipw_estimates: model does not match dataset");
  for (Eigen::Index i = 0; i < model.prob.size(); ++i)
    if (!(model.prob[i] > 0 && model.prob[i] <= 1)) fail(ErrorKind::invalid_input, "ipw_estimates: probabilities must lie in (0, 1]");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < model.complete.size(); ++i)
    if (model.complete[i]) rows.push_back(i);
  const Dataset cc = binarize_for_estimation(ds.select_rows(rows));
  const Eigen::VectorXd w = ipw_weights(model, cfg);
  const bool unit = (w.array() == 1.0).all();
  EstimateVector e = fit_outcome(cc, outcome, predictors, unit ? nullptr : &w, opts);
  e.flags.insert(e.flags.end(), model.flags.begin(), model.flags.end());
  return e;
}

}  // namespace mieval
