#include "mieval/amputation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mieval/error.hpp"
#include "mieval/parallel.hpp"
#include "mieval/rng.hpp"
#include "mieval/stats.hpp"

namespace mieval {

namespace {

std::string_view to_string(ScoreType t) {
  switch (t) {
    case ScoreType::right: return "RIGHT";
    case ScoreType::left: return "LEFT";
    case ScoreType::mid: return "MID";
    case ScoreType::tail: return "TAIL";
  }
  return "?";
}

ScoreType score_type_from_string(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (s == "RIGHT") return ScoreType::right;
  if (s == "LEFT") return ScoreType::left;
  if (s == "MID") return ScoreType::mid;
  if (s == "TAIL") return ScoreType::tail;
  fail(ErrorKind::config, "unknown score type '" + s + "'");
}

void require_complete(const Dataset& ds) {
  if (!ds.complete()) fail(ErrorKind::invalid_input, "amputation requires a complete dataset");
}

double incomplete_fraction(const Dataset& ds) {
  const auto complete = ds.complete_rows();
  const auto n_complete = static_cast<double>(std::count(complete.begin(), complete.end(), std::uint8_t{1}));
  return 1.0 - n_complete / static_cast<double>(ds.rows());
}

Dataset apply_mask(const Dataset& ds, const std::vector<std::vector<std::uint8_t>>& mask) {
  std::vector<Column> cols = ds.columns();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < cols[j].values.size(); ++i) {
      if (mask[j][i]) {
        cols[j].missing[i] = 1;
        cols[j].values[i] = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return Dataset(std::move(cols));
}

void validate_mar_shape(const AmputationPlan& plan) {
  if (plan.patterns.empty()) fail(ErrorKind::config, "MAR plan needs at least one pattern");
  if (plan.pattern_freqs.size() != plan.patterns.size()) fail(ErrorKind::config, "pattern_freqs must match patterns");
  double s = 0;
  for (double f : plan.pattern_freqs) {
    if (!(f >= 0)) fail(ErrorKind::config, "pattern_freqs must be nonnegative");
    s += f;
  }
  if (std::abs(s - 1.0) > 1e-9) fail(ErrorKind::config, "pattern_freqs must sum to 1");
  if (!(plan.overall_prop > 0 && plan.overall_prop < 1)) fail(ErrorKind::config, "overall_prop must lie in (0, 1)");
  if (!(plan.shape > 0)) fail(ErrorKind::config, "shape must be positive");
}

void validate_mar(const Dataset& ds, const AmputationPlan& plan) {
  validate_mar_shape(plan);
  if (!plan.weights.empty() && plan.weights.size() != plan.patterns.size())
    fail(ErrorKind::config, "weights must be given for every pattern or none");
  for (std::size_t k = 0; k < plan.patterns.size(); ++k) {
    if (plan.patterns[k].empty()) fail(ErrorKind::config, "empty pattern");
    for (const auto& v : plan.patterns[k])
      if (!ds.find(v)) fail(ErrorKind::config, "pattern variable '" + v + "' not in dataset");
    if (!plan.weights.empty()) {
      for (const auto& [v, w] : plan.weights[k]) {
        if (!ds.find(v)) fail(ErrorKind::config, "weight variable '" + v + "' not in dataset");
        const bool in_pattern = std::find(plan.patterns[k].begin(), plan.patterns[k].end(), v) != plan.patterns[k].end();
        if (in_pattern && w != 0.0) fail(ErrorKind::config, "weight on '" + v + "', which the pattern amputes");
        if (w != 0.0 && ds.column(v).spec.kind == Kind::categorical)
          fail(ErrorKind::config, "weight on categorical '" + v + "' is not supported");
      }
    }
  }
}

// Weighted sum of standardized columns for one pattern, standardized again.
std::vector<double> pattern_scores(const Dataset& ds, const AmputationPlan& plan, std::size_t k,
                                   const std::vector<std::size_t>& rows) {
  std::vector<std::pair<std::size_t, double>> terms;
  if (plan.weights.empty()) {
    for (std::size_t j = 0; j < ds.cols(); ++j) {
      const auto& spec = ds.column(j).spec;
      if (spec.kind == Kind::categorical || spec.role == Role::id) continue;
      if (!plan.condition_on_outcomes && spec.role != Role::predictor) continue;
      if (std::find(plan.patterns[k].begin(), plan.patterns[k].end(), spec.name) != plan.patterns[k].end()) continue;
      terms.emplace_back(j, 1.0);
    }
  } else {
    for (const auto& [v, w] : plan.weights[k])
      if (w != 0.0) terms.emplace_back(ds.index_of(v), w);
  }
  std::vector<double> s(rows.size(), 0.0);
  for (const auto& [j, w] : terms) {
    const auto& vals = ds.column(j).values;
    double mean = 0, sq = 0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    for (double v : vals) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / static_cast<double>(vals.size()));
    if (sd == 0) continue;
    for (std::size_t r = 0; r < rows.size(); ++r) s[r] += w * (vals[rows[r]] - mean) / sd;
  }
  if (s.size() < 2) return s;
  double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  double sq = 0;
  for (double v : s) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(s.size()));
  if (!(sd > 1e-12)) fail(ErrorKind::invalid_input, "uninformative weights: pattern scores have zero variance");
  for (auto& v : s) v = (v - mean) / sd;
  return s;
}

double median(std::vector<double> v) {
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
  const double upper = v[h];
  if (v.size() % 2 == 1) return upper;
  return 0.5 * (upper + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h)));
}

double mean_prob(const std::vector<double>& scores, double shape, double shift) {
  double s = 0;
  for (double x : scores) s += stats::logistic(shape * (x - shift));
  return s / static_cast<double>(scores.size());
}

}  // namespace

double solve_shift(const std::vector<double>& scores, double target, double shape) {
  if (!(target > 0 && target < 1)) fail(ErrorKind::invalid_input, "solve_shift: target must lie in (0, 1)");
  if (!(shape > 0)) fail(ErrorKind::invalid_input, "solve_shift: shape must be positive");
  if (scores.empty()) fail(ErrorKind::invalid_input, "solve_shift: no scores");
  for (double s : scores)
    if (!std::isfinite(s)) fail(ErrorKind::invalid_input, "solve_shift: non-finite score");
  const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
  // The mean probability decreases in the shift.
  double span = 1.0 / shape;
  double lo = *mn - span, hi = *mx + span;
  while (mean_prob(scores, shape, lo) < target) {
    span *= 2;
    lo = *mn - span;
  }
  span = 1.0 / shape;
  while (mean_prob(scores, shape, hi) > target) {
    span *= 2;
    hi = *mx + span;
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double f = mean_prob(scores, shape, mid);
    if (f > target) lo = mid;
    else hi = mid;
    if (hi - lo <= 0) break;
  }
  if (std::abs(mean_prob(scores, shape, mid) - target) > 1e-6)
    fail(ErrorKind::convergence, "solve_shift: bisection did not reach the target");
  return mid;
}

AmputedSet ampute_mcar(const Dataset& ds, const AmputationPlan& plan, int a) {
  require_complete(ds);
  std::vector<std::vector<std::uint8_t>> mask(ds.cols(), std::vector<std::uint8_t>(ds.rows(), 0));
  for (const auto& [var, rate] : plan.per_variable_rates) {
    if (!(rate >= 0 && rate <= 1)) fail(ErrorKind::invalid_input, "MCAR rate for '" + var + "' outside [0, 1]");
    const std::size_t j = ds.index_of(var);
    Rng vr(derive_seed(plan.seed, {static_cast<std::uint64_t>(a), 0x3ca7ULL, j}));
    for (std::size_t i = 0; i < ds.rows(); ++i) mask[j][i] = vr.uniform() < rate ? 1 : 0;
  }
  AmputedSet out{a, apply_mask(ds, mask), 0.0};
  out.realized_prop = incomplete_fraction(out.dataset);
  return out;
}

AmputedSet ampute_mar(const Dataset& ds, const AmputationPlan& plan, int a) {
  require_complete(ds);
  validate_mar(ds, plan);
  const std::size_t n = ds.rows();
  Rng rng(plan.seed, {static_cast<std::uint64_t>(a), 0xa3a7ULL});

  // Allocate every row to one candidate pattern.
  std::vector<double> cum(plan.pattern_freqs.size());
  std::partial_sum(plan.pattern_freqs.begin(), plan.pattern_freqs.end(), cum.begin());
  std::vector<std::vector<std::size_t>> members(plan.patterns.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * cum.back();
    std::size_t k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    k = std::min(k, cum.size() - 1);
    while (plan.pattern_freqs[k] == 0 && k > 0) --k;
    members[k].push_back(i);
  }

  std::vector<std::vector<std::uint8_t>> mask(ds.cols(), std::vector<std::uint8_t>(n, 0));
  for (std::size_t k = 0; k < plan.patterns.size(); ++k) {
    const auto& rows = members[k];
    if (rows.empty()) continue;
    std::vector<double> s = pattern_scores(ds, plan, k, rows);
    if (plan.score_type == ScoreType::left) {
      for (auto& v : s) v = -v;
    } else if (plan.score_type == ScoreType::mid || plan.score_type == ScoreType::tail) {
      const double med = median(s);
      for (auto& v : s) v = std::abs(v - med);
      if (plan.score_type == ScoreType::mid)
        for (auto& v : s) v = -v;
    }
    const double shift = solve_shift(s, plan.overall_prop, plan.shape);
    std::vector<std::size_t> cols;
    for (const auto& v : plan.patterns[k]) cols.push_back(ds.index_of(v));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double prob = stats::logistic(plan.shape * (s[r] - shift));
      if (rng.uniform() < prob)
        for (std::size_t j : cols) mask[j][rows[r]] = 1;
    }
  }
  AmputedSet out{a, apply_mask(ds, mask), 0.0};
  out.realized_prop = incomplete_fraction(out.dataset);
  return out;
}

AmputedSet ampute(const Dataset& ds, const AmputationPlan& plan, int a) {
  return plan.mechanism == Mechanism::mcar ? ampute_mcar(ds, plan, a) : ampute_mar(ds, plan, a);
}

std::vector<AmputedSet> ampute_batch(const Dataset& ds, const AmputationPlan& plan, int threads) {
  if (plan.A < 1) fail(ErrorKind::config, "A must be at least 1");
  std::vector<AmputedSet> out(static_cast<std::size_t>(plan.A));
  parallel_for(out.size(), threads, [&](std::size_t k) { out[k] = ampute(ds, plan, static_cast<int>(k) + 1); });
  return out;
}

void save_amputed(const AmputedSet& set, const std::string& csv_path, const std::string& mask_path) {
  save_csv(set.dataset, csv_path);
  std::ofstream out(mask_path);
  if (!out) fail(ErrorKind::invalid_input, "cannot write '" + mask_path + "'");
  const auto& ds = set.dataset;
  for (std::size_t j = 0; j < ds.cols(); ++j) out << (j ? "," : "") << ds.column(j).spec.name;
  out << '\n';
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    for (std::size_t j = 0; j < ds.cols(); ++j) out << (j ? "," : "") << (ds.is_missing(i, j) ? '1' : '0');
    out << '\n';
  }
}

AmputationPlan amputation_plan_from_json(const nlohmann::json& j) {
  AmputationPlan p;
  try {
    auto mech = j.value("mechanism", std::string("MAR"));
    std::transform(mech.begin(), mech.end(), mech.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (mech == "MCAR") p.mechanism = Mechanism::mcar;
    else if (mech == "MAR") p.mechanism = Mechanism::mar;
    else fail(ErrorKind::config, "unknown mechanism '" + mech + "'");
    p.patterns = j.value("patterns", std::vector<std::vector<std::string>>{});
    if (j.contains("pattern_freqs")) {
      p.pattern_freqs = j["pattern_freqs"].get<std::vector<double>>();
    } else if (j.contains("pattern_counts")) {
      p.pattern_freqs = j["pattern_counts"].get<std::vector<double>>();
      const double s = std::accumulate(p.pattern_freqs.begin(), p.pattern_freqs.end(), 0.0);
      for (auto& f : p.pattern_freqs) f /= s;
    }
    p.overall_prop = j.value("overall_prop", 0.5);
    if (j.contains("weights")) p.weights = j["weights"].get<std::vector<std::map<std::string, double>>>();
    p.score_type = score_type_from_string(j.value("score_type", std::string("RIGHT")));
    p.shape = j.value("shape", 1.0);
    p.condition_on_outcomes = j.value("condition_on_outcomes", true);
    if (j.contains("per_variable_rates")) p.per_variable_rates = j["per_variable_rates"].get<std::map<std::string, double>>();
    p.A = j.value("A", 1);
    p.seed = j.value("seed", std::uint64_t{1});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("amputation plan: ") + e.what());
  }
  if (p.A < 1) fail(ErrorKind::config, "A must be at least 1");
  if (p.mechanism == Mechanism::mar) validate_mar_shape(p);
  return p;
}

nlohmann::json amputation_plan_to_json(const AmputationPlan& p) {
  nlohmann::json j;
  j["mechanism"] = p.mechanism == Mechanism::mcar ? "MCAR" : "MAR";
  if (p.mechanism == Mechanism::mar) {
    j["patterns"] = p.patterns;
    j["pattern_freqs"] = p.pattern_freqs;
    j["overall_prop"] = p.overall_prop;
    if (!p.weights.empty()) j["weights"] = p.weights;
    j["score_type"] = to_string(p.score_type);
    j["shape"] = p.shape;
    j["condition_on_outcomes"] = p.condition_on_outcomes;
  } else {
    j["per_variable_rates"] = p.per_variable_rates;
  }
  j["A"] = p.A;
  j["seed"] = p.seed;
  return j;
}

AmputationPlan load_amputation_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open amputation plan '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "amputation plan '" + path + "': " + e.what());
  }
  return amputation_plan_from_json(j);
}

AmputationPlan cohort_mar_plan(double overall_prop, int A, std::uint64_t seed) {
  AmputationPlan p;
  p.mechanism = Mechanism::mar;
  p.patterns = {{"BMI"}, {"Race"}, {"Ethnicity"}, {"Race", "BMI"}, {"Ethnicity", "BMI"}, {"Ethnicity", "Race"},
                {"BMI", "Race", "Ethnicity"}};
  const std::vector<double> counts{9993, 4951, 1226, 2159, 3732, 910, 623};
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  for (double c : counts) p.pattern_freqs.push_back(c / total);
  p.overall_prop = overall_prop;
  p.A = A;
  p.seed = seed;
  return p;
}

AmputationPlan cohort_mcar_plan(int A, std::uint64_t seed) {
  AmputationPlan p;
  p.mechanism = Mechanism::mcar;
  p.per_variable_rates = {{"BMI", 0.30}, {"Race", 0.15}, {"Ethnicity", 0.15}};
  p.A = A;
  p.seed = seed;
  return p;
}

}  // namespace mieval
