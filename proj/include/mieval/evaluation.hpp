#pragma once

// Evaluation of missing-data methods against gold-standard estimates:
// amputate, impute (or weight), estimate, pool, then score.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mieval/amputation.hpp"
#include "mieval/analysis.hpp"
#include "mieval/fcs.hpp"
#include "mieval/forest.hpp"
#include "mieval/ipw.hpp"
#include "mieval/jm.hpp"

namespace mieval {

// --- methods ---------------------------------------------------------------

enum class MethodKind { fcs, jm, forest, ipw, oracle };

MethodKind method_kind_from_string(const std::string& s);
std::string_view to_string(MethodKind k);

/// One method specification. Only the block matching `kind` is used; `m`,
/// seeds and thread counts inside the blocks are set by the evaluation.
struct MethodConfig {
  MethodKind kind = MethodKind::fcs;
  FcsConfig fcs;
  JmConfig jm;
  ForestConfig forest;
  IpwConfig ipw;
  std::string label;  // optional display name
};

MethodConfig method_from_json(const nlohmann::json& j);
/// Canonical settings (no seeds, m or threads); the fingerprint hashes this.
nlohmann::json to_json(const MethodConfig& m);
/// Readable identifier built from the settings, e.g. "fcs-norm_out_ohc_mono".
std::string method_id(const MethodConfig& m);

/// 64-bit FNV-1a of a string, printed as 16 hex digits by `hex_fingerprint`.
std::uint64_t fnv1a(const std::string& s);
std::string hex_fingerprint(const nlohmann::json& j);

/// Imputation draws for one amputated dataset. The oracle returns m copies
/// of `truth` and needs it; the IPW kind is rejected here.
std::vector<ImputedSet> impute(const Dataset& amputed, const MethodConfig& method, int m, std::uint64_t seed,
                               const Dataset* truth = nullptr, int threads = 1);

// --- gold standard ---------------------------------------------------------

struct GoldStandard {
  std::vector<OutcomeModel> outcomes;
  std::vector<std::string> predictors;  // binarized predictor names
  std::vector<EstimateVector> estimates;  // one per outcome
};

/// The dataset must be complete ("not complete" otherwise). Reference
/// categories are frozen first so every later analysis drops the same level.
GoldStandard gold_standard(const Dataset& complete, const std::vector<OutcomeModel>& outcomes,
                           const FitOptions& opts = {});

// --- metrics ---------------------------------------------------------------

struct OutcomeMetrics {
  std::string outcome;
  std::vector<std::string> predictors;
  Eigen::VectorXd gold_q, gold_se;
  // Per successful amputation (rows) and predictor (columns).
  Eigen::MatrixXd q, se, lower, upper;
  Eigen::VectorXd rb, er, mse, cr, ratio_se;  // er is NaN where |q| < 1e-6
  double mean_abs_rb = 0, mean_mse = 0, mean_er = 0, mean_cr = 0, mean_ratio_se = 0;
  std::vector<std::string> flags;
};

/// Metric vectors from the per-amputation pooled estimates.
OutcomeMetrics compute_metrics(const std::string& outcome, const EstimateVector& gold, const Eigen::MatrixXd& q,
                               const Eigen::MatrixXd& se, const Eigen::MatrixXd& lower, const Eigen::MatrixXd& upper);

struct AmputationRecord {
  int a = 0;
  bool ok = false;
  std::string error;
  double realized_prop = 0;
  std::vector<std::string> flags;
  double seconds = 0;  // wall clock; never written to deterministic artifacts
};

struct MethodReport {
  std::string id;
  nlohmann::json config;
  std::string fingerprint;
  int m = 0;
  int A = 0;
  int succeeded = 0;
  bool failed = false;
  std::vector<OutcomeMetrics> outcomes;
  double mean_abs_rb = 0, mean_mse = 0, mean_er = 0, mean_cr = 0, mean_ratio_se = 0;
  std::vector<AmputationRecord> amputations;
  std::vector<std::string> flags;
};

struct EvalSettings {
  int m = 5;
  double level = 0.95;
  double min_success = 0.8;
  int threads = 1;
  std::uint64_t seed = 1;  // experiment seed
  FitOptions fit;
};

/// Runs amputations 1..plan.A of `complete` with `plan` as given (its seed
/// fixes the masks, shared by every method), imputes with streams derived
/// from (settings.seed, method fingerprint, a), fits, pools and scores.
MethodReport evaluate_method(const Dataset& complete, const GoldStandard& gold, const MethodConfig& method,
                             const AmputationPlan& plan, const EvalSettings& settings);

nlohmann::json to_json(const MethodReport& r, bool include_timings = false);
/// Summary layout (settings, mean metrics): one row per outcome plus an "all" row.
void write_report_csv(const MethodReport& r, std::ostream& out);
/// Header and row for a multi-method summary table.
std::string summary_csv_header();
std::string summary_csv_row(const MethodReport& r);

// --- comparisons -----------------------------------------------------------

struct WilcoxonResult {
  double w_plus = 0;   // sum of ranks of positive differences
  double w_minus = 0;
  double p_value = 1;
  int n_effective = 0;
  bool exact = false;
  std::vector<std::string> flags;
};

/// Two-sided signed-rank test of x - y. Zero differences are dropped, ties
/// get midranks; exact null distribution when at most 12 differences remain,
/// normal approximation with tie and continuity corrections otherwise.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y);

enum class WtlMetric { abs_rb, mse, abs_one_minus_er, cr, ratio_se };

WtlMetric wtl_metric_from_string(const std::string& s);
std::string_view to_string(WtlMetric m);

struct WtlGrid {
  WtlMetric metric = WtlMetric::abs_rb;
  std::vector<std::string> methods;
  Eigen::MatrixXi grid;  // grid(a, b) = wins - losses of a against b over outcomes
  int n_outcomes = 0;
};

/// Lower is better for |RB|, MSE, |1 - ER| and ratio_SE; CR is compared by
/// |CR - nominal|. Throws Error(numerical) if the grid is not antisymmetric.
WtlGrid win_tie_loss(const std::vector<MethodReport>& reports, WtlMetric metric, double alpha = 0.05,
                     double nominal = 0.95);

void write_wtl_csv(const WtlGrid& g, std::ostream& out);

}  // namespace mieval
