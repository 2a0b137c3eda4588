#include "mieval/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "mieval/error.hpp"
#include "mieval/parallel.hpp"
#include "mieval/pooling.hpp"
#include "mieval/rng.hpp"
#include "mieval/stats.hpp"

namespace mieval {

// --- methods ---------------------------------------------------------------

MethodKind method_kind_from_string(const std::string& s) {
  if (s == "fcs") return MethodKind::fcs;
  if (s == "jm") return MethodKind::jm;
  if (s == "forest") return MethodKind::forest;
  if (s == "ipw") return MethodKind::ipw;
  if (s == "oracle") return MethodKind::oracle;
  fail(ErrorKind::config, "unknown method '" + s + "'");
}

std::string_view to_string(MethodKind k) {
  switch (k) {
    case MethodKind::fcs: return "fcs";
    case MethodKind::jm: return "jm";
    case MethodKind::forest: return "forest";
    case MethodKind::ipw: return "ipw";
    case MethodKind::oracle: return "oracle";
  }
  return "?";
}

namespace {

nlohmann::json settings_json(const MethodConfig& m) {
  nlohmann::json j;
  switch (m.kind) {
    case MethodKind::fcs: j = to_json(m.fcs); break;
    case MethodKind::jm: j = to_json(m.jm); break;
    case MethodKind::forest: j = to_json(m.forest); break;
    case MethodKind::ipw: j = to_json(m.ipw); break;
    case MethodKind::oracle: j = nlohmann::json::object(); break;
  }
  j.erase("m");
  j.erase("seed");
  return j;
}

}  // namespace

MethodConfig method_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::config, "method entry must be an object");
  MethodConfig m;
  if (!j.contains("method")) fail(ErrorKind::config, "method entry without \"method\"");
  m.kind = method_kind_from_string(j["method"].get<std::string>());
  m.label = j.value("label", std::string{});
  switch (m.kind) {
    case MethodKind::fcs: m.fcs = fcs_config_from_json(j); break;
    case MethodKind::jm: m.jm = jm_config_from_json(j); break;
    case MethodKind::forest: m.forest = forest_config_from_json(j); break;
    case MethodKind::ipw: m.ipw = ipw_config_from_json(j); break;
    case MethodKind::oracle: break;
  }
  // Reject keys the method does not understand (typos would otherwise be silent).
  const auto known = settings_json(m);
  for (const auto& [key, value] : j.items()) {
    if (key == "method" || key == "label" || key == "m" || key == "seed") continue;
    if (!known.contains(key)) fail(ErrorKind::config, "unknown setting '" + key + "' for method " + std::string(to_string(m.kind)));
  }
  return m;
}

nlohmann::json to_json(const MethodConfig& m) {
  nlohmann::json j = settings_json(m);
  j["method"] = to_string(m.kind);
  if (!m.label.empty()) j["label"] = m.label;
  return j;
}

std::string method_id(const MethodConfig& m) {
  if (!m.label.empty()) return m.label;
  auto flag = [](const char* name, bool on) { return std::string(on ? "" : "no") + name; };
  std::string id(to_string(m.kind));
  switch (m.kind) {
    case MethodKind::fcs:
      id += "-" + std::string(to_string(m.fcs.variant)) + "_" + flag("out", m.fcs.include_outcomes) + "_" +
            flag("ohn", m.fcs.one_hot_numeric_bins) + "_" + flag("ohc", m.fcs.one_hot_categorical) + "_" +
            std::string(to_string(m.fcs.visit_order));
      if (m.fcs.variant == FcsVariant::default_) id += "_pmm" + std::to_string(m.fcs.pmm_donors);
      break;
    case MethodKind::jm:
      id += "_" + flag("out", m.jm.include_outcomes) + "_" + flag("ohn", m.jm.one_hot_numeric_bins);
      break;
    case MethodKind::forest:
      id += "_" + flag("out", m.forest.include_outcomes) + "_" + flag("ohn", m.forest.one_hot_numeric_bins) + "_" +
            flag("ohc", m.forest.one_hot_categorical) + "_" + std::string(to_string(m.forest.visit_order)) + "_pmm" +
            std::to_string(m.forest.pmm_donors);
      break;
    case MethodKind::ipw:
      id += "-" + std::string(to_string(m.ipw.prob_model)) + "_" + flag("out", m.ipw.include_outcomes) + "_" +
            flag("ohn", m.ipw.one_hot_numeric_bins);
      break;
    case MethodKind::oracle: break;
  }
  return id;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_fingerprint(const nlohmann::json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

std::vector<ImputedSet> impute(const Dataset& amputed, const MethodConfig& method, int m, std::uint64_t seed,
                               const Dataset* truth, int threads) {
  switch (method.kind) {
    case MethodKind::fcs: {
      auto cfg = method.fcs;
      cfg.m = m;
      cfg.seed = seed;
      cfg.threads = threads;
      return run_fcs(amputed, cfg);
    }
    case MethodKind::jm: {
      auto cfg = method.jm;
      cfg.m = m;
      cfg.seed = seed;
      cfg.threads = threads;
      return run_jm_imputer(amputed, cfg);
    }
    case MethodKind::forest: {
      auto cfg = method.forest;
      cfg.m = m;
      cfg.seed = seed;
      cfg.threads = threads;
      return run_forest_imputer(amputed, cfg);
    }
    case MethodKind::oracle: {
      if (!truth) fail(ErrorKind::invalid_input, "the oracle imputer needs the complete dataset");
      if (truth->rows() != amputed.rows() || truth->cols() != amputed.cols())
        fail(ErrorKind::invalid_input, "oracle: complete dataset does not match");
      std::vector<ImputedSet> out(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j) {
        out[static_cast<std::size_t>(j)].index = j + 1;
        out[static_cast<std::size_t>(j)].dataset = *truth;
      }
      return out;
    }
    case MethodKind::ipw: break;
  }
  fail(ErrorKind::invalid_input, "IPW does not impute");
}

// --- gold standard ---------------------------------------------------------

GoldStandard gold_standard(const Dataset& complete, const std::vector<OutcomeModel>& outcomes, const FitOptions& opts) {
  if (!complete.complete()) fail(ErrorKind::invalid_input, "gold standard: dataset is not complete");
  if (outcomes.empty()) fail(ErrorKind::invalid_input, "gold standard: no outcomes");
  const Dataset bin = binarize_for_estimation(resolve_references(complete));
  GoldStandard g;
  g.outcomes = outcomes;
  g.predictors = predictor_names(bin);
  for (const auto& o : outcomes) g.estimates.push_back(fit_outcome(bin, o, g.predictors, nullptr, opts));
  return g;
}

// --- metrics ---------------------------------------------------------------

namespace {

double mean_of(const Eigen::VectorXd& v) {
  double s = 0;
  int n = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isnan(v[i])) {
      s += v[i];
      ++n;
    }
  return n > 0 ? s / n : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

OutcomeMetrics compute_metrics(const std::string& outcome, const EstimateVector& gold, const Eigen::MatrixXd& q,
                               const Eigen::MatrixXd& se, const Eigen::MatrixXd& lower, const Eigen::MatrixXd& upper) {
  const Eigen::Index A = q.rows(), d = q.cols();
  if (d != static_cast<Eigen::Index>(gold.size()) || se.rows() != A || se.cols() != d || lower.rows() != A ||
      lower.cols() != d || upper.rows() != A || upper.cols() != d)
    fail(ErrorKind::invalid_input, "metrics: dimensions do not agree");
  if (A < 1) fail(ErrorKind::invalid_input, "metrics: no amputations");
  OutcomeMetrics r;
  r.outcome = outcome;
  r.predictors = gold.names;
  r.gold_q = gold.q;
  r.gold_se = gold.se;
  r.q = q;
  r.se = se;
  r.lower = lower;
  r.upper = upper;
  r.rb.resize(d);
  r.er.resize(d);
  r.mse.resize(d);
  r.cr.resize(d);
  r.ratio_se.resize(d);
  const double Ad = static_cast<double>(A);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double g = gold.q[i];
    // Mean as g plus mean deviation, so estimates equal to gold give RB = 0 exactly.
    double dev = 0, sq = 0, covered = 0, ratio = 0;
    for (Eigen::Index a = 0; a < A; ++a) {
      const double e = q(a, i) - g;
      dev += e;
      sq += e * e;
      covered += (lower(a, i) <= g && g <= upper(a, i)) ? 1.0 : 0.0;
      ratio += se(a, i) / gold.se[i];
    }
    r.rb[i] = dev / Ad;
    r.mse[i] = sq / Ad;
    r.cr[i] = covered / Ad;
    r.ratio_se[i] = ratio / Ad;
    r.er[i] = std::abs(g) < 1e-6 ? std::numeric_limits<double>::quiet_NaN() : (g + r.rb[i]) / g;
    if (r.mse[i] < r.rb[i] * r.rb[i] - 1e-12)
      fail(ErrorKind::numerical, "metrics: MSE below squared bias for '" + gold.names[static_cast<std::size_t>(i)] + "'");
    if (r.cr[i] < 0.90) r.flags.push_back("too optimistic:" + gold.names[static_cast<std::size_t>(i)]);
    if (r.cr[i] > 0.99) r.flags.push_back("possibly inefficient, inspect ratio_SE:" + gold.names[static_cast<std::size_t>(i)]);
    if (std::isnan(r.er[i])) r.flags.push_back("er_suppressed:" + gold.names[static_cast<std::size_t>(i)]);
  }
  r.mean_abs_rb = mean_of(r.rb.cwiseAbs());
  r.mean_mse = mean_of(r.mse);
  r.mean_er = mean_of(r.er);
  r.mean_cr = mean_of(r.cr);
  r.mean_ratio_se = mean_of(r.ratio_se);
  return r;
}

namespace {

struct PerAmputation {
  AmputationRecord record;
  // Per outcome: pooled q, se, lower, upper.
  std::vector<Eigen::VectorXd> q, se, lower, upper;
};

}  // namespace

MethodReport evaluate_method(const Dataset& complete, const GoldStandard& gold, const MethodConfig& method,
                             const AmputationPlan& plan, const EvalSettings& settings) {
  if (settings.m < 2 && method.kind != MethodKind::ipw) fail(ErrorKind::config, "m must be at least 2");
  if (plan.A < 1) fail(ErrorKind::config, "A must be at least 1");
  MethodReport report;
  report.id = method_id(method);
  report.config = to_json(method);
  report.fingerprint = hex_fingerprint(report.config);
  report.m = method.kind == MethodKind::ipw ? 1 : settings.m;
  report.A = plan.A;
  const std::uint64_t method_seed = derive_seed(settings.seed, {fnv1a(report.config.dump())});
  const Dataset truth = resolve_references(complete);

  std::vector<PerAmputation> results(static_cast<std::size_t>(plan.A));
  parallel_for(results.size(), settings.threads, [&](std::size_t k) {
    const int a = static_cast<int>(k) + 1;
    PerAmputation& res = results[k];
    res.record.a = a;
    const auto start = std::chrono::steady_clock::now();
    try {
      const AmputedSet amp = ampute(truth, plan, a);
      res.record.realized_prop = amp.realized_prop;
      const std::uint64_t seed = derive_seed(method_seed, {static_cast<std::uint64_t>(a)});
      for (std::size_t o = 0; o < gold.outcomes.size(); ++o) {
        res.q.emplace_back();
        res.se.emplace_back();
        res.lower.emplace_back();
        res.upper.emplace_back();
      }
      if (method.kind == MethodKind::ipw) {
        auto cfg = method.ipw;
        cfg.seed = seed;
        const auto model = fit_missingness_model(amp.dataset, cfg);
        res.record.flags = model.flags;
        for (std::size_t o = 0; o < gold.outcomes.size(); ++o) {
          const auto e = ipw_estimates(amp.dataset, model, gold.outcomes[o], gold.predictors, cfg, settings.fit);
          res.q[o] = e.q;
          res.se[o] = e.se;
          res.lower[o].resize(e.q.size());
          res.upper[o].resize(e.q.size());
          for (Eigen::Index i = 0; i < e.q.size(); ++i) {
            const auto ci = wald_ci(e.q[i], e.se[i], std::nullopt, settings.level);
            res.lower[o][i] = ci.lower;
            res.upper[o][i] = ci.upper;
          }
          for (const auto& f : e.flags) res.record.flags.push_back(gold.outcomes[o].name + ":" + f);
        }
      } else {
        const auto sets = impute(amp.dataset, method, settings.m, seed, &truth, 1);
        std::vector<std::vector<EstimateVector>> fits(gold.outcomes.size());
        std::set<std::string> flags;
        for (const auto& s : sets) {
          flags.insert(s.flags.begin(), s.flags.end());
          const Dataset bin = binarize_for_estimation(s.dataset);
          for (std::size_t o = 0; o < gold.outcomes.size(); ++o)
            fits[o].push_back(fit_outcome(bin, gold.outcomes[o], gold.predictors, nullptr, settings.fit));
        }
        res.record.flags.assign(flags.begin(), flags.end());
        for (std::size_t o = 0; o < gold.outcomes.size(); ++o) {
          const auto p = rubin_pool(fits[o], settings.level);
          res.q[o] = p.qbar;
          res.se[o] = p.se;
          res.lower[o] = p.lower;
          res.upper[o] = p.upper;
        }
      }
      for (std::size_t o = 0; o < gold.outcomes.size(); ++o)
        if (!res.q[o].allFinite() || !res.se[o].allFinite())
          fail(ErrorKind::numerical, "non-finite pooled estimate for outcome '" + gold.outcomes[o].name + "'");
      res.record.ok = true;
    } catch (const Error& e) {
      res.record.ok = false;
      res.record.error = e.what();
    }
    res.record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });

  std::vector<std::size_t> ok;
  for (std::size_t k = 0; k < results.size(); ++k) {
    report.amputations.push_back(results[k].record);
    if (results[k].record.ok) ok.push_back(k);
    else report.flags.push_back("amputation " + std::to_string(k + 1) + " failed: " + results[k].record.error);
  }
  report.succeeded = static_cast<int>(ok.size());
  report.failed = static_cast<double>(ok.size()) < settings.min_success * static_cast<double>(plan.A);
  if (report.failed) {
    report.flags.push_back("method failed: fewer than " + format_number(100 * settings.min_success) +
                           "% of amputations succeeded");
    return report;
  }
  const auto A = static_cast<Eigen::Index>(ok.size());
  double s_rb = 0, s_mse = 0, s_er = 0, s_cr = 0, s_ratio = 0;
  int n_er = 0;
  for (std::size_t o = 0; o < gold.outcomes.size(); ++o) {
    const auto d = static_cast<Eigen::Index>(gold.predictors.size());
    Eigen::MatrixXd q(A, d), se(A, d), lo(A, d), up(A, d);
    for (Eigen::Index r = 0; r < A; ++r) {
      const auto& res = results[ok[static_cast<std::size_t>(r)]];
      q.row(r) = res.q[o].transpose();
      se.row(r) = res.se[o].transpose();
      lo.row(r) = res.lower[o].transpose();
      up.row(r) = res.upper[o].transpose();
    }
    auto met = compute_metrics(gold.outcomes[o].name, gold.estimates[o], q, se, lo, up);
    s_rb += met.mean_abs_rb;
    s_mse += met.mean_mse;
    if (!std::isnan(met.mean_er)) {
      s_er += met.mean_er;
      ++n_er;
    }
    s_cr += met.mean_cr;
    s_ratio += met.mean_ratio_se;
    report.outcomes.push_back(std::move(met));
  }
  const double O = static_cast<double>(gold.outcomes.size());
  report.mean_abs_rb = s_rb / O;
  report.mean_mse = s_mse / O;
  report.mean_er = n_er > 0 ? s_er / n_er : std::numeric_limits<double>::quiet_NaN();
  report.mean_cr = s_cr / O;
  report.mean_ratio_se = s_ratio / O;
  return report;
}

// --- report output -----------------------------------------------------------

namespace {

nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number_or_null(v[i]));
  return a;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
  return a;
}

std::string cell(double x) { return std::isfinite(x) ? format_number(x) : std::string{}; }

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Settings columns of the summary layout.
std::vector<std::string> settings_cells(const nlohmann::json& cfg) {
  auto text = [&](const char* key) -> std::string {
    if (!cfg.contains(key)) return "-";
    const auto& v = cfg[key];
    if (v.is_boolean()) return v.get<bool>() ? "TRUE" : "FALSE";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "-";
    return v.dump();
  };
  std::string variant = cfg.contains("variant") ? text("variant") : (cfg.contains("prob_model") ? text("prob_model") : "-");
  std::string ohc = text("one_hot_categorical");
  if (cfg.value("method", "") == "jm") ohc = "TRUE";
  std::string pmm = text("pmm_donors");
  if (cfg.value("method", "") == "fcs" && variant != "default") pmm = "-";
  return {text("method"), variant, text("include_outcomes"), text("one_hot_numeric_bins"), ohc, text("visit_order"), pmm};
}

}  // namespace

nlohmann::json to_json(const MethodReport& r, bool include_timings) {
  nlohmann::json j{{"id", r.id},           {"config", r.config},          {"fingerprint", r.fingerprint},
                   {"m", r.m},             {"A", r.A},                    {"succeeded", r.succeeded},
                   {"failed", r.failed},   {"mean_abs_rb", number_or_null(r.mean_abs_rb)},
                   {"mean_mse", number_or_null(r.mean_mse)}, {"mean_er", number_or_null(r.mean_er)},
                   {"mean_cr", number_or_null(r.mean_cr)},   {"mean_ratio_se", number_or_null(r.mean_ratio_se)},
                   {"flags", r.flags}};
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : r.outcomes) {
    outs.push_back({{"outcome", o.outcome},
                    {"predictors", o.predictors},
                    {"gold_q", vector_json(o.gold_q)},
                    {"gold_se", vector_json(o.gold_se)},
                    {"rb", vector_json(o.rb)},
                    {"er", vector_json(o.er)},
                    {"mse", vector_json(o.mse)},
                    {"cr", vector_json(o.cr)},
                    {"ratio_se", vector_json(o.ratio_se)},
                    {"mean_abs_rb", number_or_null(o.mean_abs_rb)},
                    {"mean_mse", number_or_null(o.mean_mse)},
                    {"mean_er", number_or_null(o.mean_er)},
                    {"mean_cr", number_or_null(o.mean_cr)},
                    {"mean_ratio_se", number_or_null(o.mean_ratio_se)},
                    {"pooled_q", matrix_json(o.q)},
                    {"pooled_se", matrix_json(o.se)},
                    {"pooled_lower", matrix_json(o.lower)},
                    {"pooled_upper", matrix_json(o.upper)},
                    {"flags", o.flags}});
  }
  j["outcomes"] = outs;
  nlohmann::json amps = nlohmann::json::array();
  for (const auto& a : r.amputations) {
    nlohmann::json aj{{"a", a.a}, {"ok", a.ok}, {"realized_prop", a.realized_prop}, {"flags", a.flags}};
    if (!a.ok) aj["error"] = a.error;
    if (include_timings) aj["seconds"] = a.seconds;
    amps.push_back(aj);
  }
  j["amputations"] = amps;
  return j;
}

std::string summary_csv_header() {
  return "method_id,method,univariate_method,use_outcomes,one_hot_numeric_bins,one_hot_categorical,visit_order,"
         "pmm_donors,m,A,succeeded,mean_abs_RB,mean_MSE,mean_ER,mean_CR,mean_ratio_SE";
}

std::string summary_csv_row(const MethodReport& r) {
  std::string row = csv_quote(r.id);
  for (const auto& c : settings_cells(r.config)) row += "," + csv_quote(c);
  row += "," + std::to_string(r.m) + "," + std::to_string(r.A) + "," + std::to_string(r.succeeded);
  for (double v : {r.mean_abs_rb, r.mean_mse, r.mean_er, r.mean_cr, r.mean_ratio_se}) row += "," + (r.failed ? "" : cell(v));
  return row;
}

void write_report_csv(const MethodReport& r, std::ostream& out) {
  out << "method_id,method,univariate_method,use_outcomes,one_hot_numeric_bins,one_hot_categorical,visit_order,"
         "pmm_donors,outcome,mean_abs_RB,mean_MSE,mean_ER,mean_CR,mean_ratio_SE\n";
  std::string prefix = csv_quote(r.id);
  for (const auto& c : settings_cells(r.config)) prefix += "," + csv_quote(c);
  for (const auto& o : r.outcomes) {
    out << prefix << "," << csv_quote(o.outcome) << "," << cell(o.mean_abs_rb) << "," << cell(o.mean_mse) << ","
        << cell(o.mean_er) << "," << cell(o.mean_cr) << "," << cell(o.mean_ratio_se) << "\n";
  }
  out << prefix << ",all";
  for (double v : {r.mean_abs_rb, r.mean_mse, r.mean_er, r.mean_cr, r.mean_ratio_se}) out << "," << (r.failed ? "" : cell(v));
  out << "\n";
}

// --- comparisons -------------------------------------------------------------

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) fail(ErrorKind::invalid_input, "wilcoxon: lengths differ");
  if (x.empty()) fail(ErrorKind::invalid_input, "wilcoxon: empty samples");
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i] - y[i];
    if (std::isnan(v)) fail(ErrorKind::invalid_input, "wilcoxon: NaN difference");
    if (v != 0) d.push_back(v);
  }
  WilcoxonResult r;
  const auto n = static_cast<int>(d.size());
  r.n_effective = n;
  if (n == 0) {
    r.p_value = 1;
    r.exact = true;
    r.flags.push_back("no signal");
    return r;
  }
  // Doubled midranks of |d| are integers.
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<long long> rank2(d.size());
  double tie_term = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const long long t = static_cast<long long>(j - i + 1);
    const long long doubled = static_cast<long long>(i + 1) + static_cast<long long>(j + 1);  // 2 * midrank
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = doubled;
    tie_term += static_cast<double>(t * t * t - t);
    i = j + 1;
  }
  long long total2 = 0, plus2 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    total2 += rank2[i];
    if (d[i] > 0) plus2 += rank2[i];
  }
  r.w_plus = static_cast<double>(plus2) / 2.0;
  r.w_minus = static_cast<double>(total2 - plus2) / 2.0;

  if (n <= 12) {
    // Null distribution of the doubled positive-rank sum by dynamic programming.
    r.exact = true;
    std::vector<std::uint64_t> count(static_cast<std::size_t>(total2) + 1, 0);
    count[0] = 1;
    long long reach = 0;
    for (long long rk : rank2) {
      for (long long s = reach; s >= 0; --s)
        if (count[static_cast<std::size_t>(s)]) count[static_cast<std::size_t>(s + rk)] += count[static_cast<std::size_t>(s)];
      reach += rk;
    }
    const long long obs = std::llabs(2 * plus2 - total2);
    std::uint64_t extreme = 0;
    for (long long s = 0; s <= total2; ++s)
      if (std::llabs(2 * s - total2) >= obs) extreme += count[static_cast<std::size_t>(s)];
    r.p_value = std::min(1.0, static_cast<double>(extreme) / std::ldexp(1.0, n));
    return r;
  }
  const double nd = n;
  const double mean = nd * (nd + 1) / 4.0;
  const double var = nd * (nd + 1) * (2 * nd + 1) / 24.0 - tie_term / 48.0;
  const double z = std::max(0.0, std::abs(r.w_plus - mean) - 0.5) / std::sqrt(var);
  r.p_value = std::min(1.0, 2.0 * (1.0 - stats::normal_cdf(z)));
  return r;
}

WtlMetric wtl_metric_from_string(const std::string& s) {
  if (s == "abs_rb" || s == "RB") return WtlMetric::abs_rb;
  if (s == "mse" || s == "MSE") return WtlMetric::mse;
  if (s == "abs_one_minus_er" || s == "ER") return WtlMetric::abs_one_minus_er;
  if (s == "cr" || s == "CR") return WtlMetric::cr;
  if (s == "ratio_se" || s == "ratio_SE") return WtlMetric::ratio_se;
  fail(ErrorKind::config, "unknown comparison metric '" + s + "'");
}

std::string_view to_string(WtlMetric m) {
  switch (m) {
    case WtlMetric::abs_rb: return "abs_rb";
    case WtlMetric::mse: return "mse";
    case WtlMetric::abs_one_minus_er: return "abs_one_minus_er";
    case WtlMetric::cr: return "cr";
    case WtlMetric::ratio_se: return "ratio_se";
  }
  return "?";
}

namespace {

// Per-predictor values for which lower is better.
Eigen::VectorXd loss_values(const OutcomeMetrics& o, WtlMetric metric, double nominal) {
  switch (metric) {
    case WtlMetric::abs_rb: return o.rb.cwiseAbs();
    case WtlMetric::mse: return o.mse;
    case WtlMetric::abs_one_minus_er: return (1.0 - o.er.array()).abs().matrix();
    case WtlMetric::cr: return (o.cr.array() - nominal).abs().matrix();
    case WtlMetric::ratio_se: return o.ratio_se;
  }
  return {};
}

}  // namespace

WtlGrid win_tie_loss(const std::vector<MethodReport>& reports, WtlMetric metric, double alpha, double nominal) {
  if (reports.size() < 2) fail(ErrorKind::invalid_input, "win_tie_loss needs at least 2 reports");
  const std::size_t O = reports.front().outcomes.size();
  for (const auto& r : reports) {
    if (r.failed || r.outcomes.empty()) fail(ErrorKind::invalid_input, "win_tie_loss: report '" + r.id + "' has no metrics");
    if (r.outcomes.size() != O) fail(ErrorKind::invalid_input, "win_tie_loss: reports cover different outcomes");
  }
  WtlGrid g;
  g.metric = metric;
  g.n_outcomes = static_cast<int>(O);
  const auto M = static_cast<Eigen::Index>(reports.size());
  g.grid = Eigen::MatrixXi::Zero(M, M);
  for (const auto& r : reports) g.methods.push_back(r.id);
  for (Eigen::Index a = 0; a < M; ++a)
    for (Eigen::Index b = a + 1; b < M; ++b) {
      int score = 0;
      for (std::size_t o = 0; o < O; ++o) {
        const auto& oa = reports[static_cast<std::size_t>(a)].outcomes[o];
        const auto& ob = reports[static_cast<std::size_t>(b)].outcomes[o];
        if (oa.outcome != ob.outcome || oa.predictors != ob.predictors)
          fail(ErrorKind::invalid_input, "win_tie_loss: reports are not aligned");
        const Eigen::VectorXd va = loss_values(oa, metric, nominal), vb = loss_values(ob, metric, nominal);
        std::vector<double> x, y;
        for (Eigen::Index i = 0; i < va.size(); ++i)
          if (!std::isnan(va[i]) && !std::isnan(vb[i])) {
            x.push_back(va[i]);
            y.push_back(vb[i]);
          }
        if (x.empty()) continue;
        const auto w = wilcoxon_signed_rank(x, y);
        if (w.p_value < alpha && w.w_plus != w.w_minus) score += w.w_plus < w.w_minus ? 1 : -1;
      }
      g.grid(a, b) = score;
      g.grid(b, a) = -score;
    }
  for (Eigen::Index a = 0; a < M; ++a)
    for (Eigen::Index b = 0; b < M; ++b)
      if (g.grid(a, b) != -g.grid(b, a)) fail(ErrorKind::numerical, "win_tie_loss grid is not antisymmetric");
  return g;
}

void write_wtl_csv(const WtlGrid& g, std::ostream& out) {
  out << "method";
  for (const auto& m : g.methods) out << "," << csv_quote(m);
  out << "\n";
  for (Eigen::Index a = 0; a < g.grid.rows(); ++a) {
    out << csv_quote(g.methods[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < g.grid.cols(); ++b) out << "," << g.grid(a, b);
    out << "\n";
  }
}

}  // namespace mieval
