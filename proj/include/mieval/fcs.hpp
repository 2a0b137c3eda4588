#pragma once

// Fully conditional specification (chained equations) imputer.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mieval/imputation.hpp"

namespace mieval {

enum class FcsVariant { default_, norm, logreg };

FcsVariant fcs_variant_from_string(const std::string& s);
std::string_view to_string(FcsVariant v);

struct FcsConfig {
  FcsVariant variant = FcsVariant::default_;
  bool include_outcomes = true;
  bool one_hot_numeric_bins = false;
  bool one_hot_categorical = false;
  VisitOrder visit_order = VisitOrder::monotone;
  int max_iter = 21;
  int pmm_donors = 3;
  int m = 5;
  std::uint64_t seed = 1;
  double early_stop_tol = 1e-4;
  int threads = 1;
};

FcsConfig fcs_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FcsConfig& cfg);

/// m completed datasets in the imputation representation (one-hot columns
/// as configured). Imputation j draws from the stream (seed, j).
std::vector<ImputedSet> run_fcs(const Dataset& ds, const FcsConfig& cfg);

}  // namespace mieval
