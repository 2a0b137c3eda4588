#pragma once

// MCAR and MAR amputation of complete datasets.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mieval/tabular.hpp"

namespace mieval {

enum class Mechanism { mcar, mar };
enum class ScoreType { right, left, mid, tail };

struct AmputationPlan {
  Mechanism mechanism = Mechanism::mar;
  // MAR
  std::vector<std::vector<std::string>> patterns;  // variables blanked together
  std::vector<double> pattern_freqs;
  double overall_prop = 0.5;
  // Per-pattern weights over observed variables; empty means the default:
  // weight 1 on every numeric or binary column observed under the pattern
  // (outcomes included when condition_on_outcomes).
  std::vector<std::map<std::string, double>> weights;
  ScoreType score_type = ScoreType::right;
  double shape = 1.0;
  bool condition_on_outcomes = true;
  // MCAR
  std::map<std::string, double> per_variable_rates;

  int A = 1;
  std::uint64_t seed = 1;
};

struct AmputedSet {
  int index = 1;  // 1-based amputation index
  Dataset dataset;
  double realized_prop = 0.0;  // fraction of incomplete rows
};

AmputationPlan amputation_plan_from_json(const nlohmann::json& j);
nlohmann::json amputation_plan_to_json(const AmputationPlan& plan);
AmputationPlan load_amputation_plan(const std::string& path);

/// Shift such that mean(logistic(shape·(scores − shift))) = target.
double solve_shift(const std::vector<double>& scores, double target, double shape);

/// Amputation number `a` (1-based) of the plan; its stream is keyed by (seed, a).
AmputedSet ampute_mcar(const Dataset& ds, const AmputationPlan& plan, int a = 1);
AmputedSet ampute_mar(const Dataset& ds, const AmputationPlan& plan, int a = 1);
AmputedSet ampute(const Dataset& ds, const AmputationPlan& plan, int a = 1);

/// Amputations 1..plan.A.
std::vector<AmputedSet> ampute_batch(const Dataset& ds, const AmputationPlan& plan, int threads = 1);

/// CSV of the masked dataset plus a 0/1 mask sidecar with the same header.
void save_amputed(const AmputedSet& set, const std::string& csv_path, const std::string& mask_path);

/// MAR plan over BMI / Race / Ethnicity with the seven incomplete patterns
/// of the motivating cohort and the given incomplete fraction.
AmputationPlan cohort_mar_plan(double overall_prop = 23594.0 / 56123.0, int A = 25, std::uint64_t seed = 1);

/// MCAR plan with per-variable rates BMI 0.30, Race 0.15, Ethnicity 0.15.
AmputationPlan cohort_mcar_plan(int A = 25, std::uint64_t seed = 1);

}  // namespace mieval
