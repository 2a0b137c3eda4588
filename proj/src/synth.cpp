#include "mieval/synth.hpp"

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

std::string_view to_string(MarginalType t) {
  switch (t) {
    case MarginalType::binned: return "binned";
    case MarginalType::normal: return "normal";
    case MarginalType::binary: return "binary";
    case MarginalType::categorical: return "categorical";
  }
  return "?";
}

MarginalType marginal_from_string(const std::string& s) {
  if (s == "binned") return MarginalType::binned;
  if (s == "normal") return MarginalType::normal;
  if (s == "binary") return MarginalType::binary;
  if (s == "categorical") return MarginalType::categorical;
  fail(ErrorKind::config, "unknown marginal '" + s + "'");
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) fail(ErrorKind::config, "matrix must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) fail(ErrorKind::config, "ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  auto j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

// Standard normal from a uniform strictly inside (0, 1).
double std_normal(Rng& rng) {
  const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  return stats::normal_quantile(u);
}

void check_probs(const std::vector<double>& p, std::size_t expected, const std::string& name) {
  if (p.size() != expected) fail(ErrorKind::config, "predictor '" + name + "': wrong number of probabilities");
  double s = 0;
  for (double v : p) {
    if (!(v >= 0)) fail(ErrorKind::config, "predictor '" + name + "': negative probability");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) fail(ErrorKind::config, "predictor '" + name + "': probabilities must sum to 1");
}

ColumnSpec predictor_column(const PredictorSpec& p) {
  ColumnSpec c;
  c.name = p.name;
  c.role = Role::predictor;
  switch (p.marginal) {
    case MarginalType::binned:
      c.kind = Kind::numeric;
      c.bins = p.bins;
      c.log_transform = p.log_transform;
      c.reference_category = p.reference;
      break;
    case MarginalType::normal:
      c.kind = Kind::numeric;
      c.log_transform = p.log_transform;
      break;
    case MarginalType::binary: c.kind = Kind::binary; break;
    case MarginalType::categorical:
      c.kind = Kind::categorical;
      c.categories = p.categories;
      c.reference_category = p.reference;
      break;
  }
  return c;
}

// Coefficient per level of one predictor (0 for the reference level).
struct LevelCoefs {
  std::vector<double> per_level;  // binned/categorical
  double slope = 0.0;             // binary/normal
};

}  // namespace

Eigen::MatrixXd CohortSpec::latent_correlation() const {
  const auto p = static_cast<Eigen::Index>(predictors.size());
  if (correlation.size() > 0) return correlation;
  if (loadings.size() > 0) {
    if (loadings.rows() != p) fail(ErrorKind::config, "loadings must have one row per predictor");
    Eigen::MatrixXd r = loadings * loadings.transpose();
    for (Eigen::Index k = 0; k < p; ++k) {
      const double u = loadings.row(k).squaredNorm();
      if (u >= 1.0) fail(ErrorKind::invalid_input, "loadings row for '" + predictors[static_cast<std::size_t>(k)].name + "' has norm >= 1");
      r(k, k) = 1.0;
    }
    return r;
  }
  return Eigen::MatrixXd::Identity(p, p);
}

const OutcomeTruth& GroundTruth::outcome(const std::string& name) const {
  for (const auto& o : outcomes)
    if (o.name == name) return o;
  fail(ErrorKind::invalid_input, "no ground truth for outcome '" + name + "'");
}

nlohmann::json to_json(const GroundTruth& truth) {
  auto arr = nlohmann::json::array();
  for (const auto& o : truth.outcomes) {
    nlohmann::json j;
    j["name"] = o.name;
    j["type"] = o.type == OutcomeType::logistic ? "logistic" : "survival";
    j["intercept"] = o.intercept;
    nlohmann::json coefs = nlohmann::json::object();
    for (std::size_t k = 0; k < o.names.size(); ++k) coefs[o.names[k]] = o.beta[static_cast<Eigen::Index>(k)];
    j["coefficients"] = coefs;
    j["order"] = o.names;
    arr.push_back(j);
  }
  return {{"outcomes", arr}};
}

CohortSpec cohort_spec_from_json(const nlohmann::json& j) {
  CohortSpec s;
  try {
    s.n = j.value("n", std::size_t{1000});
    s.seed = j.value("seed", std::uint64_t{1});
    for (const auto& pj : j.at("predictors")) {
      PredictorSpec p;
      p.name = pj.at("name").get<std::string>();
      p.marginal = marginal_from_string(pj.at("marginal").get<std::string>());
      p.bins = pj.value("bins", std::vector<double>{});
      p.probs = pj.value("probs", std::vector<double>{});
      if (pj.contains("range")) {
        p.lo = pj["range"].at(0).get<double>();
        p.hi = pj["range"].at(1).get<double>();
      }
      p.mean = pj.value("mean", 0.0);
      p.sd = pj.value("sd", 1.0);
      p.p = pj.value("p", 0.5);
      p.categories = pj.value("categories", std::vector<std::string>{});
      p.reference = pj.value("reference", std::string{});
      p.log_transform = pj.value("log_transform", false);
      s.predictors.push_back(std::move(p));
    }
    for (const auto& oj : j.at("outcomes")) {
      OutcomeSpec o;
      o.name = oj.at("name").get<std::string>();
      const auto type = oj.value("type", std::string("logistic"));
      if (type == "logistic") o.type = OutcomeType::logistic;
      else if (type == "survival") o.type = OutcomeType::survival;
      else fail(ErrorKind::config, "unknown outcome type '" + type + "'");
      o.intercept = oj.value("intercept", 0.0);
      o.baseline_rate = oj.value("baseline_rate", 0.1);
      o.censor_time = oj.value("censor_time", 1.0);
      if (oj.contains("coefficients"))
        for (const auto& [k, v] : oj["coefficients"].items()) o.coefficients[k] = v.get<double>();
      s.outcomes.push_back(std::move(o));
    }
    if (j.contains("correlation")) s.correlation = matrix_from_json(j["correlation"]);
    if (j.contains("loadings")) s.loadings = matrix_from_json(j["loadings"]);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("cohort spec: ") + e.what());
  }
  return s;
}

nlohmann::json cohort_spec_to_json(const CohortSpec& s) {
  nlohmann::json j;
  j["n"] = s.n;
  j["seed"] = s.seed;
  auto preds = nlohmann::json::array();
  for (const auto& p : s.predictors) {
    nlohmann::json pj{{"name", p.name}, {"marginal", to_string(p.marginal)}};
    switch (p.marginal) {
      case MarginalType::binned:
        pj["bins"] = p.bins;
        pj["probs"] = p.probs;
        pj["range"] = {p.lo, p.hi};
        pj["reference"] = p.reference;
        break;
      case MarginalType::normal:
        pj["mean"] = p.mean;
        pj["sd"] = p.sd;
        break;
      case MarginalType::binary: pj["p"] = p.p; break;
      case MarginalType::categorical:
        pj["categories"] = p.categories;
        pj["probs"] = p.probs;
        pj["reference"] = p.reference;
        break;
    }
    if (p.log_transform) pj["log_transform"] = true;
    preds.push_back(pj);
  }
  j["predictors"] = preds;
  auto outs = nlohmann::json::array();
  for (const auto& o : s.outcomes) {
    nlohmann::json oj{{"name", o.name}, {"type", o.type == OutcomeType::logistic ? "logistic" : "survival"}};
    if (o.type == OutcomeType::logistic) {
      oj["intercept"] = o.intercept;
    } else {
      oj["baseline_rate"] = o.baseline_rate;
      oj["censor_time"] = o.censor_time;
    }
    oj["coefficients"] = o.coefficients;
    outs.push_back(oj);
  }
  j["outcomes"] = outs;
  if (s.correlation.size() > 0) j["correlation"] = matrix_to_json(s.correlation);
  if (s.loadings.size() > 0) j["loadings"] = matrix_to_json(s.loadings);
  return j;
}

CohortSpec load_cohort_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open cohort spec '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "cohort spec '" + path + "': " + e.what());
  }
  return cohort_spec_from_json(j);
}

std::pair<std::string, std::string> survival_columns(const std::string& outcome) {
  return {outcome + "_time", outcome};
}

std::vector<ColumnSpec> cohort_schema(const CohortSpec& spec) {
  std::vector<ColumnSpec> schema;
  for (const auto& p : spec.predictors) schema.push_back(predictor_column(p));
  for (const auto& o : spec.outcomes) {
    if (o.type == OutcomeType::logistic) {
      schema.push_back(ColumnSpec{o.name, Kind::binary, Role::outcome, {}, {}, std::nullopt, false, {}});
    } else {
      const auto [tname, ename] = survival_columns(o.name);
      schema.push_back(ColumnSpec{tname, Kind::numeric, Role::survival_time, {}, {}, std::nullopt, false, {}});
      schema.push_back(ColumnSpec{ename, Kind::binary, Role::survival_event, {}, {}, std::nullopt, false, {}});
    }
  }
  return schema;
}

std::vector<std::string> binarized_names(const std::vector<ColumnSpec>& schema) {
  std::vector<std::string> names;
  for (const auto& c : schema) {
    if (c.role != Role::predictor) continue;
    const bool levels = c.kind == Kind::categorical || (c.kind == Kind::numeric && !c.bins.empty() && c.indicator_of.empty());
    if (!levels) {
      names.push_back(c.name);
      continue;
    }
    if (!c.reference_category) fail(ErrorKind::config, "column '" + c.name + "' needs a reference category");
    const auto labels = c.kind == Kind::categorical ? c.categories : bin_labels(c);
    for (const auto& l : labels)
      if (l != *c.reference_category) names.push_back(indicator_name(c.name, l));
  }
  return names;
}

std::pair<Dataset, GroundTruth> generate_cohort(const CohortSpec& spec, int threads) {
  const std::size_t p = spec.predictors.size();
  if (p == 0) fail(ErrorKind::config, "cohort spec has no predictors");
  if (spec.n == 0) fail(ErrorKind::config, "cohort spec needs n >= 1");

  for (const auto& pr : spec.predictors) {
    switch (pr.marginal) {
      case MarginalType::binned:
        if (pr.bins.empty()) fail(ErrorKind::config, "predictor '" + pr.name + "': binned marginal needs bins");
        check_probs(pr.probs, pr.bins.size() + 1, pr.name);
        if (!(pr.lo < pr.bins.front() && pr.hi > pr.bins.back()))
          fail(ErrorKind::config, "predictor '" + pr.name + "': range must enclose the cut points");
        if (pr.log_transform && pr.lo <= 0) fail(ErrorKind::config, "predictor '" + pr.name + "': log transform needs positive support");
        break;
      case MarginalType::normal:
        if (!(pr.sd > 0)) fail(ErrorKind::config, "predictor '" + pr.name + "': sd must be positive");
        break;
      case MarginalType::binary:
        if (!(pr.p >= 0 && pr.p <= 1)) fail(ErrorKind::config, "predictor '" + pr.name + "': p outside [0,1]");
        break;
      case MarginalType::categorical:
        if (pr.categories.size() < 2) fail(ErrorKind::config, "predictor '" + pr.name + "': needs >= 2 categories");
        check_probs(pr.probs, pr.categories.size(), pr.name);
        break;
    }
  }

  const Eigen::MatrixXd r = spec.latent_correlation();
  if (r.rows() != static_cast<Eigen::Index>(p) || r.cols() != static_cast<Eigen::Index>(p))
    fail(ErrorKind::invalid_input, "correlation matrix must be p x p");
  if (!r.isApprox(r.transpose(), 1e-12) || (r.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12)
    fail(ErrorKind::invalid_input, "correlation matrix must be symmetric with unit diagonal");
  Eigen::LLT<Eigen::MatrixXd> llt(r);
  if (llt.info() != Eigen::Success) fail(ErrorKind::invalid_input, "correlation matrix is not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();

  const auto schema = cohort_schema(spec);
  const auto bnames = binarized_names(schema);

  // Planted coefficients per predictor level, plus the ground-truth vectors.
  GroundTruth truth;
  std::vector<std::vector<LevelCoefs>> coefs(spec.outcomes.size(), std::vector<LevelCoefs>(p));
  for (std::size_t o = 0; o < spec.outcomes.size(); ++o) {
    const auto& os = spec.outcomes[o];
    for (const auto& [k, v] : os.coefficients)
      if (std::find(bnames.begin(), bnames.end(), k) == bnames.end())
        fail(ErrorKind::config, "outcome '" + os.name + "': coefficient for unknown predictor '" + k + "'");
    auto coef_of = [&](const std::string& name) {
      const auto it = os.coefficients.find(name);
      return it == os.coefficients.end() ? 0.0 : it->second;
    };
    OutcomeTruth t;
    t.name = os.name;
    t.type = os.type;
    t.intercept = os.type == OutcomeType::logistic ? os.intercept : std::log(os.baseline_rate);
    t.names = bnames;
    t.beta.resize(static_cast<Eigen::Index>(bnames.size()));
    for (std::size_t k = 0; k < bnames.size(); ++k) t.beta[static_cast<Eigen::Index>(k)] = coef_of(bnames[k]);
    truth.outcomes.push_back(std::move(t));
    for (std::size_t k = 0; k < p; ++k) {
      const auto& col = schema[k];
      auto& lc = coefs[o][k];
      if (col.kind == Kind::categorical || (col.kind == Kind::numeric && !col.bins.empty())) {
        const auto labels = col.kind == Kind::categorical ? col.categories : bin_labels(col);
        for (const auto& l : labels) lc.per_level.push_back(l == *col.reference_category ? 0.0 : coef_of(indicator_name(col.name, l)));
      } else {
        lc.slope = coef_of(col.name);
      }
    }
    if (os.type == OutcomeType::survival && !(os.baseline_rate > 0 && os.censor_time > 0))
      fail(ErrorKind::config, "outcome '" + os.name + "': baseline_rate and censor_time must be positive");
  }

  const std::size_t n = spec.n;
  std::vector<std::vector<double>> values(schema.size(), std::vector<double>(n));
  parallel_for(n, threads, [&](std::size_t i) {
    Rng rng(spec.seed, {0x5e7ULL, i});
    Eigen::VectorXd z(static_cast<Eigen::Index>(p));
    for (std::size_t k = 0; k < p; ++k) z[static_cast<Eigen::Index>(k)] = std_normal(rng);
    const Eigen::VectorXd latent = chol * z;
    std::vector<std::size_t> level(p, 0);
    for (std::size_t k = 0; k < p; ++k) {
      const auto& pr = spec.predictors[k];
      const double lz = latent[static_cast<Eigen::Index>(k)];
      const double u = std::clamp(stats::normal_cdf(lz), 1e-16, 1.0 - 1e-16);
      double x = 0;
      switch (pr.marginal) {
        case MarginalType::binned: {
          // Piecewise-uniform inverse CDF.
          double cum = 0;
          std::size_t b = 0;
          while (b + 1 < pr.probs.size() && u >= cum + pr.probs[b]) cum += pr.probs[b++];
          const double left = b == 0 ? pr.lo : pr.bins[b - 1];
          const double right = b == pr.bins.size() ? pr.hi : pr.bins[b];
          const double frac = pr.probs[b] > 0 ? std::clamp((u - cum) / pr.probs[b], 0.0, 1.0) : 0.5;
          x = left + frac * (right - left);
          if (x >= right) x = std::nextafter(right, left);
          level[k] = b;
          break;
        }
        case MarginalType::normal: x = pr.mean + pr.sd * lz; break;
        case MarginalType::binary: x = u > 1.0 - pr.p ? 1.0 : 0.0; break;
        case MarginalType::categorical: {
          double cum = 0;
          std::size_t c = 0;
          while (c + 1 < pr.probs.size() && u >= cum + pr.probs[c]) cum += pr.probs[c++];
          x = static_cast<double>(c);
          level[k] = c;
          break;
        }
      }
      values[k][i] = x;
    }
    std::size_t col = p;
    for (std::size_t o = 0; o < spec.outcomes.size(); ++o) {
      const auto& os = spec.outcomes[o];
      double eta = 0;
      for (std::size_t k = 0; k < p; ++k) {
        const auto& lc = coefs[o][k];
        eta += lc.per_level.empty() ? lc.slope * values[k][i] : lc.per_level[level[k]];
      }
      const double u = rng.uniform();
      if (os.type == OutcomeType::logistic) {
        values[col++][i] = u < stats::logistic(os.intercept + eta) ? 1.0 : 0.0;
      } else {
        const double rate = os.baseline_rate * std::exp(eta);
        const double t = -std::log1p(-u) / rate;
        const bool event = t <= os.censor_time;
        values[col++][i] = event ? t : os.censor_time;
        values[col++][i] = event ? 1.0 : 0.0;
      }
    }
  });

  std::vector<Column> cols;
  cols.reserve(schema.size());
  for (std::size_t k = 0; k < schema.size(); ++k)
    cols.push_back(Column{schema[k], std::move(values[k]), std::vector<std::uint8_t>(n, 0)});
  return {Dataset(std::move(cols)), std::move(truth)};
}

namespace {

std::vector<double> normalized(std::vector<double> v) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (auto& x : v) x /= s;
  return v;
}

PredictorSpec binned(std::string name, std::vector<double> bins, std::vector<double> pct, double lo, double hi,
                     std::string reference, bool log_transform = false) {
  PredictorSpec p;
  p.name = std::move(name);
  p.marginal = MarginalType::binned;
  p.bins = std::move(bins);
  p.probs = normalized(std::move(pct));
  p.lo = lo;
  p.hi = hi;
  p.reference = std::move(reference);
  p.log_transform = log_transform;
  return p;
}

PredictorSpec flag(std::string name, double prob) {
  PredictorSpec p;
  p.name = std::move(name);
  p.marginal = MarginalType::binary;
  p.p = prob;
  return p;
}

PredictorSpec categorical(std::string name, std::vector<std::string> cats, std::vector<double> pct, std::string reference) {
  PredictorSpec p;
  p.name = std::move(name);
  p.marginal = MarginalType::categorical;
  p.categories = std::move(cats);
  p.probs = normalized(std::move(pct));
  p.reference = std::move(reference);
  return p;
}

}  // namespace

CohortSpec default_cohort_spec(std::size_t n, std::uint64_t seed) {
  CohortSpec s;
  s.n = n;
  s.seed = seed;
  // Loadings on two latent factors: frailty, metabolic.
  std::vector<std::pair<PredictorSpec, std::pair<double, double>>> rows{
      {flag("male", 0.49), {0.1, 0.0}},
      {binned("age", {40, 50, 60, 70, 80}, {7, 11, 22, 28, 22, 10}, 18, 89, "60≤age<70"), {0.6, 0.1}},
      {binned("BMI", {20, 25, 30, 35, 40}, {1, 8, 18, 18, 12, 13}, 12.13, 79.73, "30≤BMI<35", true), {-0.1, 0.6}},
      {categorical("Race", {"White", "Black", "Asian", "Other"}, {55, 26, 3, 1}, "White"), {0.2, 0.3}},
      {categorical("Ethnicity", {"NotHispanic", "Hispanic"}, {73, 16}, "NotHispanic"), {-0.2, 0.2}},
      {binned("HbA1c", {6, 7, 8, 9, 10}, {17, 30, 21, 12, 7, 12}, 4.1, 19.3, "6≤HbA1c<7"), {0.1, 0.6}},
      {flag("MI", 0.13), {0.4, 0.1}},
      {flag("CHF", 0.23), {0.5, 0.1}},
      {flag("PVD", 0.21), {0.4, 0.1}},
      {flag("Stroke", 0.17), {0.4, 0.0}},
      {flag("Dementia", 0.05), {0.5, -0.1}},
      {flag("Pulmonary", 0.31), {0.3, 0.1}},
      {flag("LiverMild", 0.16), {0.2, 0.2}},
      {flag("LiverSevere", 0.03), {0.3, 0.1}},
      {flag("Renal", 0.30), {0.5, 0.2}},
      {flag("Cancer", 0.14), {0.3, 0.0}},
      {flag("HIV", 0.01), {0.1, 0.0}},
      {flag("Metformin", 0.26), {-0.2, 0.5}},
      {flag("DPP4", 0.05), {0.0, 0.3}},
      {flag("SGLT2", 0.05), {-0.1, 0.3}},
      {flag("GLP1", 0.07), {-0.1, 0.4}},
      {flag("TZD", 0.01), {0.0, 0.2}},
      {flag("Insulin", 0.25), {0.3, 0.5}},
      {flag("Sulfonylurea", 0.09), {0.1, 0.3}},
  };
  s.loadings.resize(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    s.predictors.push_back(rows[k].first);
    s.loadings(static_cast<Eigen::Index>(k), 0) = rows[k].second.first;
    s.loadings(static_cast<Eigen::Index>(k), 1) = rows[k].second.second;
  }

  const std::map<std::string, double> shared{
      {"male", 0.2},
      {"age=age<40", -0.7},
      {"age=40≤age<50", -0.4},
      {"age=50≤age<60", -0.2},
      {"age=70≤age<80", 0.4},
      {"age=age≥80", 0.7},
      {"BMI=BMI<20", 0.3},
      {"BMI=20≤BMI<25", 0.1},
      {"BMI=25≤BMI<30", -0.1},
      {"BMI=35≤BMI<40", 0.2},
      {"BMI=BMI≥40", 0.5},
      {"Race=Black", 0.3},
      {"Race=Asian", -0.2},
      {"Race=Other", 0.1},
      {"Ethnicity=Hispanic", 0.2},
      {"HbA1c=HbA1c<6", -0.1},
      {"HbA1c=7≤HbA1c<8", 0.1},
      {"HbA1c=8≤HbA1c<9", 0.2},
      {"HbA1c=9≤HbA1c<10", 0.3},
      {"HbA1c=HbA1c≥10", 0.4},
      {"MI", 0.2},
      {"CHF", 0.4},
      {"PVD", 0.1},
      {"Stroke", 0.2},
      {"Dementia", 0.4},
      {"Pulmonary", 0.3},
      {"LiverMild", 0.1},
      {"LiverSevere", 0.5},
      {"Renal", 0.4},
      {"Cancer", 0.3},
      {"HIV", 0.3},
      {"Metformin", -0.3},
      {"DPP4", -0.1},
      {"SGLT2", -0.2},
      {"GLP1", -0.2},
      {"TZD", 0.0},
      {"Insulin", 0.3},
      {"Sulfonylurea", 0.1},
  };
  auto scaled = [&](double f) {
    auto m = shared;
    for (auto& [k, v] : m) v *= f;
    return m;
  };
  OutcomeSpec hosp{"hospitalization", OutcomeType::logistic, -1.3, 0.0, 0.0, shared};
  OutcomeSpec vent{"ventilation", OutcomeType::logistic, -2.3, 0.0, 0.0, scaled(1.2)};
  OutcomeSpec death{"death", OutcomeType::survival, 0.0, 0.004, 60.0, scaled(1.2)};
  s.outcomes = {hosp, vent, death};
  return s;
}

CohortSpec gaussian_cohort_spec(std::size_t n, std::uint64_t seed, double rho) {
  CohortSpec s;
  s.n = n;
  s.seed = seed;
  for (const char* name : {"x1", "x2", "x3"}) {
    PredictorSpec p;
    p.name = name;
    p.marginal = MarginalType::normal;
    s.predictors.push_back(p);
  }
  s.correlation = Eigen::MatrixXd::Constant(3, 3, rho);
  s.correlation.diagonal().setOnes();
  s.outcomes = {OutcomeSpec{"y", OutcomeType::logistic, -0.5, 0.0, 0.0, {{"x1", 0.8}, {"x2", -0.5}, {"x3", 0.4}}}};
  return s;
}

}  // namespace mieval
