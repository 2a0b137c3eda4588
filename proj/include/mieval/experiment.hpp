#pragma once

// Experiment orchestration: one config describes the dataset, the amputation
// plan and a grid of methods; run_experiment writes every artifact.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mieval/evaluation.hpp"
#include "mieval/pooling.hpp"
#include "mieval/synth.hpp"

namespace mieval {

std::string_view version();

struct DatasetSource {
  // Exactly one of: a cohort to generate, or a CSV with its schema.
  std::optional<CohortSpec> cohort;
  std::string csv_path;
  std::string schema_path;
};

/// {"preset": "default"|"gaussian", "n", "seed", "rho"}, a full cohort spec
/// ({"predictors": ...}), or {"csv": path, "schema": path}. Relative paths
/// are resolved against `base_dir`.
DatasetSource dataset_source_from_json(const nlohmann::json& j, const std::string& base_dir = "");
Dataset load_dataset(const DatasetSource& src);

/// Method entries whose settings hold arrays expand to the cartesian product
/// of the listed values, in key order.
std::vector<nlohmann::json> expand_method_grid(const nlohmann::json& methods);

struct ExperimentConfig {
  DatasetSource dataset;
  std::vector<std::string> outcomes;  // empty: every outcome in the dataset
  AmputationPlan plan;
  std::vector<MethodConfig> methods;
  int A = 25;
  std::optional<int> m;
  std::optional<MRule> m_rule;  // used when m is not given
  double alpha = 0.05;
  double nominal = 0.95;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int threads = 1;
  bool include_oracle = false;
  std::vector<WtlMetric> wtl_metrics{WtlMetric::abs_rb, WtlMetric::mse, WtlMetric::abs_one_minus_er, WtlMetric::cr,
                                     WtlMetric::ratio_se};
  bool record_timings = false;  // timings make run_log.jsonl differ between runs
  FitOptions fit;
  nlohmann::json source;  // the parsed config, kept for the manifest
};

/// Throws Error(config) on anything malformed: no methods, missing seed,
/// duplicate method ids, unknown keys.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::string& base_dir = "");
ExperimentConfig load_experiment_config(const std::string& path);

/// Fraction of incomplete rows the plan targets (MCAR: 1 - prod(1 - rate)).
double planned_incomplete_fraction(const AmputationPlan& plan);
/// m from cfg.m, else from cfg.m_rule at the planned fraction, else 5.
int resolve_m(const ExperimentConfig& cfg);
/// Fingerprint of the settings that determine results (not out_dir, threads).
std::string experiment_fingerprint(const ExperimentConfig& cfg);

struct ExperimentResult {
  int m = 0;
  GoldStandard gold;
  std::vector<MethodReport> reports;
  std::vector<std::string> artifacts;  // relative to out_dir
  bool any_failed = false;
};

using LogSink = std::function<void(const nlohmann::json&)>;

/// Writes gold_standard.csv, summary.csv, reports/<id>.{json,csv},
/// wtl_<metric>.csv, forest_<outcome>_<id>.csv, run_log.jsonl and
/// manifest.json into cfg.out_dir. `log` also receives every run-log line.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const LogSink& log = {});

/// Parses the per-method JSON written by run_experiment (metrics only).
MethodReport method_report_from_json(const nlohmann::json& j);

/// Summary table and win-tie-loss grids from saved reports.
std::vector<std::string> write_comparison(const std::vector<MethodReport>& reports, const std::string& out_dir,
                                          const std::vector<WtlMetric>& metrics, double alpha, double nominal);

/// Forest-plot table: predictor, exp(q), CI bounds, with the gold ratio.
void write_forest_table(const OutcomeMetrics& o, bool survival, std::ostream& out);

void write_estimates_csv(const std::vector<std::string>& names, const Eigen::VectorXd& q, const Eigen::VectorXd& se,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, const std::string& outcome,
                         std::ostream& out, bool header = true);

}  // namespace mieval
