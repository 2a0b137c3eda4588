#include "mieval/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mieval/error.hpp"
#include "mieval/rng.hpp"

#ifndef MIEVAL_VERSION
#define MIEVAL_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace mieval {

std::string_view version() { return MIEVAL_VERSION; }

namespace {

std::string resolve_path(const std::string& p, const std::string& base) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).string();
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(ErrorKind::config, where + ": unknown key '" + key + "'");
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::invalid_input, "cannot write '" + path.string() + "'");
  out << text;
}

std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// Plan-specified seeds are replaced so that --seed moves every random stream.
constexpr std::uint64_t kAmputationStream = 0xa3;

}  // namespace

DatasetSource dataset_source_from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) fail(ErrorKind::config, "dataset must be an object");
  DatasetSource src;
  try {
    if (j.contains("csv")) {
      check_keys(j, {"csv", "schema"}, "dataset");
      src.csv_path = resolve_path(j.at("csv").get<std::string>(), base_dir);
      if (!j.contains("schema")) fail(ErrorKind::config, "dataset: a CSV needs a \"schema\"");
      src.schema_path = resolve_path(j.at("schema").get<std::string>(), base_dir);
    } else if (j.contains("preset")) {
      check_keys(j, {"preset", "n", "seed", "rho"}, "dataset");
      const auto preset = j.at("preset").get<std::string>();
      const auto n = j.value("n", std::size_t{4000});
      const auto seed = j.value("seed", std::uint64_t{1});
      if (preset == "default") src.cohort = default_cohort_spec(n, seed);
      else if (preset == "gaussian") src.cohort = gaussian_cohort_spec(n, seed, j.value("rho", 0.5));
      else fail(ErrorKind::config, "dataset: unknown preset '" + preset + "'");
    } else {
      src.cohort = cohort_spec_from_json(j);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("dataset: ") + e.what());
  }
  return src;
}

Dataset load_dataset(const DatasetSource& src) {
  if (src.cohort) return generate_cohort(*src.cohort).first;
  return load_csv(src.csv_path, load_schema(src.schema_path));
}

std::vector<nlohmann::json> expand_method_grid(const nlohmann::json& methods) {
  if (!methods.is_array() || methods.empty()) fail(ErrorKind::config, "methods must be a non-empty array");
  std::vector<nlohmann::json> out;
  for (const auto& entry : methods) {
    if (!entry.is_object()) fail(ErrorKind::config, "method entry must be an object");
    std::vector<nlohmann::json> partial{nlohmann::json::object()};
    for (const auto& [key, value] : entry.items()) {
      std::vector<nlohmann::json> next;
      if (value.is_array()) {
        if (value.empty()) fail(ErrorKind::config, "method setting '" + key + "' lists no values");
        for (const auto& p : partial)
          for (const auto& v : value) {
            auto q = p;
            q[key] = v;
            next.push_back(std::move(q));
          }
      } else {
        for (auto p : partial) {
          p[key] = value;
          next.push_back(std::move(p));
        }
      }
      partial = std::move(next);
    }
    out.insert(out.end(), partial.begin(), partial.end());
  }
  return out;
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) fail(ErrorKind::config, "experiment config must be an object");
  check_keys(j,
             {"dataset", "outcomes", "amputation", "methods", "A", "m", "m_rule", "alpha", "nominal", "seed", "out_dir",
              "threads", "include_oracle", "wtl_metrics", "record_timings", "fit"},
             "experiment config");
  ExperimentConfig cfg;
  cfg.source = j;
  try {
    if (!j.contains("dataset")) fail(ErrorKind::config, "experiment config: no dataset");
    cfg.dataset = dataset_source_from_json(j.at("dataset"), base_dir);
    if (j.contains("outcomes")) cfg.outcomes = j.at("outcomes").get<std::vector<std::string>>();
    if (!j.contains("seed")) fail(ErrorKind::config, "experiment config: a seed is required");
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.A = j.value("A", cfg.A);
    if (cfg.A < 1) fail(ErrorKind::config, "A must be at least 1");
    if (j.contains("m") && !j.at("m").is_null()) {
      cfg.m = j.at("m").get<int>();
      if (*cfg.m < 2) fail(ErrorKind::config, "m must be at least 2");
    }
    if (j.contains("m_rule")) cfg.m_rule = m_rule_from_string(j.at("m_rule").get<std::string>());
    cfg.alpha = j.value("alpha", cfg.alpha);
    if (!(cfg.alpha > 0 && cfg.alpha < 1)) fail(ErrorKind::config, "alpha must lie in (0, 1)");
    cfg.nominal = j.value("nominal", cfg.nominal);
    if (!(cfg.nominal > 0 && cfg.nominal < 1)) fail(ErrorKind::config, "nominal must lie in (0, 1)");
    cfg.out_dir = resolve_path(j.value("out_dir", cfg.out_dir), base_dir);
    cfg.threads = j.value("threads", cfg.threads);
    if (cfg.threads < 1) fail(ErrorKind::config, "threads must be at least 1");
    cfg.include_oracle = j.value("include_oracle", cfg.include_oracle);
    cfg.record_timings = j.value("record_timings", cfg.record_timings);
    if (j.contains("wtl_metrics")) {
      cfg.wtl_metrics.clear();
      for (const auto& m : j.at("wtl_metrics")) cfg.wtl_metrics.push_back(wtl_metric_from_string(m.get<std::string>()));
    }
    if (j.contains("fit")) {
      const auto& f = j.at("fit");
      check_keys(f, {"max_iter", "tol", "ridge"}, "fit");
      cfg.fit.max_iter = f.value("max_iter", cfg.fit.max_iter);
      cfg.fit.tol = f.value("tol", cfg.fit.tol);
      cfg.fit.ridge = f.value("ridge", cfg.fit.ridge);
    }
    cfg.fit.level = cfg.nominal;

    if (!j.contains("amputation")) fail(ErrorKind::config, "experiment config: no amputation plan");
    const auto& aj = j.at("amputation");
    if (aj.contains("preset")) {
      check_keys(aj, {"preset", "overall_prop"}, "amputation");
      const auto preset = aj.at("preset").get<std::string>();
      if (preset == "cohort_mar") cfg.plan = cohort_mar_plan(aj.value("overall_prop", 23594.0 / 56123.0));
      else if (preset == "cohort_mcar") cfg.plan = cohort_mcar_plan();
      else fail(ErrorKind::config, "amputation: unknown preset '" + preset + "'");
    } else {
      cfg.plan = amputation_plan_from_json(aj);
    }
    cfg.plan.A = cfg.A;
    cfg.plan.seed = derive_seed(cfg.seed, {kAmputationStream});

    if (!j.contains("methods")) fail(ErrorKind::config, "experiment config: no methods");
    std::set<std::string> ids;
    for (const auto& mj : expand_method_grid(j.at("methods"))) {
      auto m = method_from_json(mj);
      if (!ids.insert(method_id(m)).second) fail(ErrorKind::config, "duplicate method '" + method_id(m) + "'");
      cfg.methods.push_back(std::move(m));
    }
    if (cfg.include_oracle) {
      MethodConfig oracle;
      oracle.kind = MethodKind::oracle;
      if (!ids.insert(method_id(oracle)).second) fail(ErrorKind::config, "duplicate method 'oracle'");
      cfg.methods.push_back(oracle);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("experiment config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "config '" + path + "': " + e.what());
  }
  return experiment_config_from_json(j, fs::path(path).parent_path().string());
}

double planned_incomplete_fraction(const AmputationPlan& plan) {
  if (plan.mechanism == Mechanism::mar) return plan.overall_prop;
  double keep = 1.0;
  for (const auto& [name, rate] : plan.per_variable_rates) keep *= 1.0 - rate;
  return 1.0 - keep;
}

int resolve_m(const ExperimentConfig& cfg) {
  if (cfg.m) return *cfg.m;
  if (cfg.m_rule) return recommend_m(planned_incomplete_fraction(cfg.plan), *cfg.m_rule);
  return 5;
}

std::string experiment_fingerprint(const ExperimentConfig& cfg) {
  nlohmann::json j;
  if (cfg.dataset.cohort) j["dataset"] = cohort_spec_to_json(*cfg.dataset.cohort);
  else j["dataset"] = {{"csv", cfg.dataset.csv_path}, {"schema", cfg.dataset.schema_path}};
  j["outcomes"] = cfg.outcomes;
  j["amputation"] = amputation_plan_to_json(cfg.plan);
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : cfg.methods) methods.push_back(to_json(m));
  j["methods"] = methods;
  j["m"] = resolve_m(cfg);
  j["alpha"] = cfg.alpha;
  j["nominal"] = cfg.nominal;
  j["seed"] = cfg.seed;
  j["fit"] = {{"max_iter", cfg.fit.max_iter}, {"tol", cfg.fit.tol}, {"ridge", cfg.fit.ridge}};
  return hex_fingerprint(j);
}

// --- tables ----------------------------------------------------------------

void write_estimates_csv(const std::vector<std::string>& names, const Eigen::VectorXd& q, const Eigen::VectorXd& se,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, const std::string& outcome,
                         std::ostream& out, bool header) {
  if (header) out << "outcome,predictor,q,se,lower,upper\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << outcome << "," << names[i] << "," << format_number(q[k]) << "," << format_number(se[k]) << ","
        << format_number(lower[k]) << "," << format_number(upper[k]) << "\n";
  }
}

void write_forest_table(const OutcomeMetrics& o, bool survival, std::ostream& out) {
  const char* ratio = survival ? "hazard_ratio" : "odds_ratio";
  out << "predictor," << ratio << ",lower,upper,gold_" << ratio << "\n";
  if (o.q.rows() == 0) return;
  for (std::size_t i = 0; i < o.predictors.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << o.predictors[i] << "," << format_number(std::exp(o.q(0, k))) << "," << format_number(std::exp(o.lower(0, k)))
        << "," << format_number(std::exp(o.upper(0, k))) << "," << format_number(std::exp(o.gold_q[k])) << "\n";
  }
}

MethodReport method_report_from_json(const nlohmann::json& j) {
  auto vec = [](const nlohmann::json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = a[i].is_null() ? std::numeric_limits<double>::quiet_NaN() : a[i].get<double>();
    return v;
  };
  auto num = [](const nlohmann::json& x) {
    return x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>();
  };
  MethodReport r;
  try {
    r.id = j.at("id").get<std::string>();
    r.config = j.at("config");
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.m = j.at("m").get<int>();
    r.A = j.at("A").get<int>();
    r.succeeded = j.at("succeeded").get<int>();
    r.failed = j.at("failed").get<bool>();
    r.mean_abs_rb = num(j.at("mean_abs_rb"));
    r.mean_mse = num(j.at("mean_mse"));
    r.mean_er = num(j.at("mean_er"));
    r.mean_cr = num(j.at("mean_cr"));
    r.mean_ratio_se = num(j.at("mean_ratio_se"));
    r.flags = j.at("flags").get<std::vector<std::string>>();
    for (const auto& oj : j.at("outcomes")) {
      OutcomeMetrics o;
      o.outcome = oj.at("outcome").get<std::string>();
      o.predictors = oj.at("predictors").get<std::vector<std::string>>();
      o.gold_q = vec(oj.at("gold_q"));
      o.gold_se = vec(oj.at("gold_se"));
      o.rb = vec(oj.at("rb"));
      o.er = vec(oj.at("er"));
      o.mse = vec(oj.at("mse"));
      o.cr = vec(oj.at("cr"));
      o.ratio_se = vec(oj.at("ratio_se"));
      o.mean_abs_rb = num(oj.at("mean_abs_rb"));
      o.mean_mse = num(oj.at("mean_mse"));
      o.mean_er = num(oj.at("mean_er"));
      o.mean_cr = num(oj.at("mean_cr"));
      o.mean_ratio_se = num(oj.at("mean_ratio_se"));
      o.flags = oj.at("flags").get<std::vector<std::string>>();
      r.outcomes.push_back(std::move(o));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("method report: ") + e.what());
  }
  return r;
}

std::vector<std::string> write_comparison(const std::vector<MethodReport>& reports, const std::string& out_dir,
                                          const std::vector<WtlMetric>& metrics, double alpha, double nominal) {
  std::vector<std::string> written;
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  std::ostringstream summary;
  summary << summary_csv_header() << "\n";
  for (const auto& r : reports) summary << summary_csv_row(r) << "\n";
  write_file(dir / "summary.csv", summary.str());
  written.push_back("summary.csv");
  std::vector<MethodReport> usable;
  for (const auto& r : reports)
    if (!r.failed) usable.push_back(r);
  if (usable.size() < 2) return written;
  for (auto metric : metrics) {
    const auto grid = win_tie_loss(usable, metric, alpha, nominal);
    std::ostringstream out;
    write_wtl_csv(grid, out);
    const std::string name = "wtl_" + std::string(to_string(metric)) + ".csv";
    write_file(dir / name, out.str());
    written.push_back(name);
  }
  return written;
}

// --- orchestration -----------------------------------------------------------

ExperimentResult run_experiment(const ExperimentConfig& cfg, const LogSink& log) {
  if (cfg.methods.empty()) fail(ErrorKind::config, "experiment needs at least one method");
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  fs::create_directories(dir / "reports");
  std::ostringstream run_log;
  auto emit = [&](nlohmann::json line) {
    run_log << line.dump() << "\n";
    if (log) log(line);
  };
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t) { return std::chrono::duration<double>(clock::now() - t).count(); };

  ExperimentResult result;
  result.m = resolve_m(cfg);
  const std::string fingerprint = experiment_fingerprint(cfg);
  emit({{"stage", "config"},
        {"fingerprint", fingerprint},
        {"m", result.m},
        {"methods", cfg.methods.size()},
        {"planned_incomplete_fraction", planned_incomplete_fraction(cfg.plan)}});

  auto t0 = clock::now();
  const Dataset complete = load_dataset(cfg.dataset);
  std::vector<OutcomeModel> outcomes = outcomes_of(complete);
  if (!cfg.outcomes.empty()) {
    std::vector<OutcomeModel> chosen;
    for (const auto& name : cfg.outcomes) {
      bool found = false;
      for (const auto& o : outcomes)
        if (o.name == name) {
          chosen.push_back(o);
          found = true;
        }
      if (!found) fail(ErrorKind::config, "outcome '" + name + "' not in dataset");
    }
    outcomes = chosen;
  }
  if (outcomes.empty()) fail(ErrorKind::config, "dataset has no outcomes");
  {
    nlohmann::json line{{"stage", "dataset"}, {"rows", complete.rows()}, {"columns", complete.cols()}};
    if (cfg.record_timings) line["seconds"] = seconds_since(t0);
    emit(line);
  }

  t0 = clock::now();
  result.gold = gold_standard(complete, outcomes, cfg.fit);
  {
    std::ostringstream out;
    out << "outcome,predictor,q,se,lower,upper\n";
    for (std::size_t o = 0; o < outcomes.size(); ++o) {
      const auto& e = result.gold.estimates[o];
      write_estimates_csv(e.names, e.q, e.se, e.lower, e.upper, outcomes[o].name, out, false);
    }
    write_file(dir / "gold_standard.csv", out.str());
    result.artifacts.push_back("gold_standard.csv");
    nlohmann::json line{{"stage", "gold_standard"}, {"outcomes", outcomes.size()},
                        {"predictors", result.gold.predictors.size()}};
    if (cfg.record_timings) line["seconds"] = seconds_since(t0);
    emit(line);
  }

  EvalSettings settings;
  settings.m = result.m;
  settings.level = cfg.nominal;
  settings.threads = cfg.threads;
  settings.seed = cfg.seed;
  settings.fit = cfg.fit;
  nlohmann::json method_index = nlohmann::json::array();
  for (const auto& method : cfg.methods) {
    t0 = clock::now();
    MethodReport r = evaluate_method(complete, result.gold, method, cfg.plan, settings);
    for (const auto& a : r.amputations) {
      nlohmann::json line{{"stage", "amputation"}, {"method", r.id}, {"a", a.a}, {"ok", a.ok},
                          {"realized_prop", a.realized_prop}, {"flags", a.flags}};
      if (!a.ok) line["error"] = a.error;
      if (cfg.record_timings) line["seconds"] = a.seconds;
      emit(line);
    }
    nlohmann::json line{{"stage", "method"}, {"method", r.id}, {"fingerprint", r.fingerprint},
                        {"succeeded", r.succeeded}, {"failed", r.failed}, {"flags", r.flags}};
    if (cfg.record_timings) line["seconds"] = seconds_since(t0);
    emit(line);

    write_file(dir / "reports" / (r.id + ".json"), json_text(to_json(r)));
    std::ostringstream csv;
    write_report_csv(r, csv);
    write_file(dir / "reports" / (r.id + ".csv"), csv.str());
    result.artifacts.push_back("reports/" + r.id + ".json");
    result.artifacts.push_back("reports/" + r.id + ".csv");
    if (!r.failed) {
      for (std::size_t o = 0; o < r.outcomes.size(); ++o) {
        std::ostringstream f;
        write_forest_table(r.outcomes[o], outcomes[o].survival, f);
        const std::string name = "forest_" + r.outcomes[o].outcome + "_" + r.id + ".csv";
        write_file(dir / name, f.str());
        result.artifacts.push_back(name);
      }
    }
    result.any_failed = result.any_failed || r.failed;
    method_index.push_back({{"id", r.id}, {"fingerprint", r.fingerprint}, {"failed", r.failed}});
    result.reports.push_back(std::move(r));
  }

  const auto written = write_comparison(result.reports, cfg.out_dir, cfg.wtl_metrics, cfg.alpha, cfg.nominal);
  result.artifacts.insert(result.artifacts.end(), written.begin(), written.end());
  emit({{"stage", "comparison"}, {"artifacts", written}});

  write_file(dir / "run_log.jsonl", run_log.str());
  result.artifacts.push_back("run_log.jsonl");
  nlohmann::json manifest{{"tool", "mieval"},
                          {"version", version()},
                          {"fingerprint", fingerprint},
                          {"seed", cfg.seed},
                          {"m", result.m},
                          {"m_rule", cfg.m ? nlohmann::json(nullptr) : (cfg.m_rule ? nlohmann::json(to_string(*cfg.m_rule)) : nlohmann::json(nullptr))},
                          {"A", cfg.A},
                          {"alpha", cfg.alpha},
                          {"nominal", cfg.nominal},
                          {"planned_incomplete_fraction", planned_incomplete_fraction(cfg.plan)},
                          {"amputation", amputation_plan_to_json(cfg.plan)},
                          {"methods", method_index},
                          {"any_failed", result.any_failed},
                          {"config", cfg.source}};
  manifest["config"].erase("out_dir");
  manifest["config"].erase("threads");
  result.artifacts.push_back("manifest.json");
  manifest["artifacts"] = result.artifacts;
  write_file(dir / "manifest.json", json_text(manifest));
  return result;
}

}  // namespace mieval
