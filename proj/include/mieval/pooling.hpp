#pragma once

// Rubin's rules and the imputation-count rules.

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mieval/estimators.hpp"

namespace mieval {

struct PooledEstimate {
  std::vector<std::string> names;
  int m = 0;
  Eigen::VectorXd qbar;
  Eigen::VectorXd within;   // W
  Eigen::VectorXd between;  // B
  Eigen::VectorXd total;    // T = W + (1 + 1/m) B
  Eigen::VectorXd se;
  Eigen::VectorXd df;       // +inf when B = 0
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd fmi;      // B / (W + B)
};

/// estimates, variances: m x d. Requires m >= 2.
PooledEstimate rubin_pool(const Eigen::MatrixXd& estimates, const Eigen::MatrixXd& variances, double level = 0.95);

/// Convenience over per-imputation estimate vectors sharing one predictor list.
PooledEstimate rubin_pool(const std::vector<EstimateVector>& fits, double level = 0.95);

/// RE = 1 + gamma0 / m.
double relative_efficiency(double gamma0, int m);

enum class MRule { von_hippel, white, bodner, rubin_default, graham };

MRule m_rule_from_string(std::string_view s);
std::string_view to_string(MRule rule);

/// Number of imputations for a fraction of incomplete cases. `max_loss` is
/// the tolerated efficiency loss for the White rule.
int recommend_m(double frac_incomplete, MRule rule, double max_loss = 0.05);

}  // namespace mieval
