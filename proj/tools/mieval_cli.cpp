// mieval: command-line front end. Each subcommand runs one stage on files
// written by the previous one; `evaluate` runs the whole pipeline.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mieval/diagnostics.hpp"
#include "mieval/error.hpp"
#include "mieval/experiment.hpp"
#include "mieval/pooling.hpp"

namespace fs = std::filesystem;
using namespace mieval;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitMethod = 3;

struct Common {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string format = "csv";
  bool verbose = false;
};

void add_common(CLI::App* app, Common& c, bool needs_config) {
  auto* opt = app->add_option("--config", c.config, "JSON configuration for this stage");
  if (needs_config) opt->required();
  app->add_option("--out-dir", c.out_dir, "Output directory");
  app->add_option("--seed", c.seed, "Master seed (overrides the config)");
  app->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  app->add_option("--format", c.format, "Tabular output format")->check(CLI::IsMember({"csv", "json"}));
  app->add_flag("--verbose", c.verbose, "Log progress to stderr");
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, path + ": " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorKind::invalid_input, "cannot write '" + p.string() + "'");
  out << text;
}

Dataset read_data(const std::string& data, const std::string& schema) { return load_csv(data, load_schema(schema)); }

void say(const Common& c, const std::string& msg) {
  if (c.verbose) std::cerr << msg << "\n";
}

// --- stages --------------------------------------------------------------

int cmd_synth(const Common& c) {
  nlohmann::json j = c.config.empty() ? nlohmann::json{{"preset", "default"}} : read_json(c.config);
  if (c.seed) j["seed"] = *c.seed;
  const auto src = dataset_source_from_json(j, c.config.empty() ? "" : fs::path(c.config).parent_path().string());
  if (!src.cohort) fail(ErrorKind::config, "synth needs a cohort specification");
  const auto [ds, truth] = generate_cohort(*src.cohort, c.threads.value_or(1));
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  save_csv(ds, (dir / "data.csv").string());
  save_schema(ds.schema(), (dir / "schema.json").string());
  write_text(dir / "truth.json", to_json(truth).dump(2) + "\n");
  write_text(dir / "cohort.json", cohort_spec_to_json(*src.cohort).dump(2) + "\n");
  say(c, "wrote " + std::to_string(ds.rows()) + " rows to " + (dir / "data.csv").string());
  return 0;
}

int cmd_ampute(const Common& c, const std::string& data, const std::string& schema) {
  auto plan = amputation_plan_from_json(read_json(c.config));
  if (c.seed) plan.seed = *c.seed;
  const Dataset ds = read_data(data, schema);
  const auto sets = ampute_batch(ds, plan, c.threads.value_or(1));
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& s : sets) {
    const auto tag = std::to_string(s.index);
    save_amputed(s, (dir / ("amputed_" + tag + ".csv")).string(), (dir / ("mask_" + tag + ".csv")).string());
    summary.push_back({{"a", s.index}, {"realized_prop", s.realized_prop}});
  }
  write_text(dir / "amputation.json", nlohmann::json{{"plan", amputation_plan_to_json(plan)}, {"sets", summary}}.dump(2) + "\n");
  say(c, "wrote " + std::to_string(sets.size()) + " amputated datasets");
  return 0;
}

int cmd_diagnose(const Common& c, const std::string& data, const std::string& schema) {
  const Dataset ds = read_data(data, schema);
  const auto patterns = pattern_summary(ds);
  const auto little = little_mcar_test(ds);
  std::ostringstream out;
  if (c.format == "json") {
    nlohmann::json pj = nlohmann::json::array();
    for (const auto& e : patterns.entries)
      pj.push_back({{"variables", e.variables}, {"count", e.count}, {"percent", e.percent}});
    out << nlohmann::json{{"n", patterns.n},
                          {"complete", patterns.complete},
                          {"incomplete", patterns.incomplete},
                          {"patterns", pj},
                          {"little_mcar", to_json(little)}}
               .dump(2)
        << "\n";
  } else {
    out << "pattern,count,percent\n";
    for (const auto& e : patterns.entries) {
      std::string name;
      for (const auto& v : e.variables) name += (name.empty() ? "" : "+") + v;
      out << (name.empty() ? "complete" : name) << "," << e.count << "," << format_number(e.percent) << "\n";
    }
    out << "little_d2,little_df,little_p\n"
        << format_number(little.d2) << "," << format_number(little.df) << "," << format_number(little.p_value) << "\n";
  }
  const fs::path p = fs::path(c.out_dir) / ("diagnostics." + c.format);
  write_text(p, out.str());
  say(c, "wrote " + p.string());
  return 0;
}

int cmd_impute(const Common& c, const std::string& data, const std::string& schema, int m) {
  const MethodConfig method = method_from_json(read_json(c.config));
  if (method.kind == MethodKind::ipw || method.kind == MethodKind::oracle)
    fail(ErrorKind::config, "impute: method '" + std::string(to_string(method.kind)) + "' does not impute");
  const Dataset ds = read_data(data, schema);
  const auto sets = impute(ds, method, m, c.seed.value_or(1), nullptr, c.threads.value_or(1));
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  nlohmann::json flags = nlohmann::json::array();
  for (const auto& s : sets) {
    save_csv(s.dataset, (dir / ("imputed_" + std::to_string(s.index) + ".csv")).string());
    flags.push_back({{"j", s.index}, {"flags", s.flags}});
  }
  write_text(dir / "imputation.json",
             nlohmann::json{{"method", to_json(method)}, {"id", method_id(method)}, {"m", m}, {"sets", flags}}.dump(2) + "\n");
  say(c, "wrote " + std::to_string(sets.size()) + " imputed datasets");
  return 0;
}

int cmd_estimate(const Common& c, const std::vector<std::string>& data, const std::string& schema, double level) {
  const auto specs = load_schema(schema);
  std::vector<Dataset> sets;
  for (const auto& d : data) sets.push_back(resolve_references(load_csv(d, specs)));
  // Reference levels come from the first set so that every fit drops the same one.
  FitOptions opts;
  opts.level = level;
  const auto outcomes = outcomes_of(sets.front());
  const auto predictors = predictor_names(binarize_for_estimation(sets.front()));
  std::ostringstream out;
  nlohmann::json all = nlohmann::json::array();
  if (c.format == "csv") out << "outcome,predictor,q,se,lower,upper\n";
  for (const auto& o : outcomes) {
    std::vector<EstimateVector> fits;
    for (const auto& s : sets) fits.push_back(fit_outcome(binarize_for_estimation(s), o, predictors, nullptr, opts));
    Eigen::VectorXd q, se, lo, up;
    if (fits.size() == 1) {
      q = fits[0].q, se = fits[0].se, lo = fits[0].lower, up = fits[0].upper;
    } else {
      const auto p = rubin_pool(fits, level);
      q = p.qbar, se = p.se, lo = p.lower, up = p.upper;
    }
    if (c.format == "csv") write_estimates_csv(predictors, q, se, lo, up, o.name, out, false);
    else
      for (std::size_t i = 0; i < predictors.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        all.push_back({{"outcome", o.name}, {"predictor", predictors[i]}, {"q", q[k]}, {"se", se[k]},
                       {"lower", lo[k]}, {"upper", up[k]}, {"m", fits.size()}});
      }
  }
  if (c.format == "json") out << all.dump(2) << "\n";
  const fs::path p = fs::path(c.out_dir) / ("estimates." + c.format);
  write_text(p, out.str());
  say(c, "wrote " + p.string());
  return 0;
}

int cmd_evaluate(const Common& c, bool out_dir_given) {
  nlohmann::json j = read_json(c.config);
  if (c.seed) j["seed"] = *c.seed;
  if (c.threads) j["threads"] = *c.threads;
  if (out_dir_given) j["out_dir"] = fs::absolute(c.out_dir).string();
  const auto cfg = experiment_config_from_json(j, fs::path(c.config).parent_path().string());
  say(c, "running " + std::to_string(cfg.methods.size()) + " methods, A=" + std::to_string(cfg.A) + ", m=" +
             std::to_string(resolve_m(cfg)));
  LogSink sink;
  if (c.verbose) sink = [](const nlohmann::json& line) {
    if (line.value("stage", "") != "amputation") std::cerr << line.dump() << "\n";
  };
  const auto result = run_experiment(cfg, sink);
  std::cout << summary_csv_header() << "\n";
  for (const auto& r : result.reports) std::cout << summary_csv_row(r) << "\n";
  if (result.any_failed) {
    std::cerr << "mieval: at least one method failed; see " << (fs::path(cfg.out_dir) / "run_log.jsonl").string() << "\n";
    return kExitMethod;
  }
  return 0;
}

int cmd_report(const Common& c, const std::string& reports_dir, double alpha, double nominal,
               const std::vector<std::string>& metrics) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(reports_dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorKind::config, "no report JSON files in '" + reports_dir + "'");
  std::vector<MethodReport> reports;
  for (const auto& f : files) reports.push_back(method_report_from_json(read_json(f.string())));
  std::vector<WtlMetric> ms;
  for (const auto& m : metrics) ms.push_back(wtl_metric_from_string(m));
  const auto written = write_comparison(reports, c.out_dir, ms, alpha, nominal);
  for (const auto& w : written) say(c, "wrote " + (fs::path(c.out_dir) / w).string());
  bool failed = false;
  for (const auto& r : reports) failed = failed || r.failed;
  return failed ? kExitMethod : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluate missing-data methods by amputation, imputation and pooling"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  Common common;
  std::string data, schema, reports_dir;
  std::vector<std::string> data_many;
  int m = 5;
  double level = 0.95, alpha = 0.05, nominal = 0.95;
  std::vector<std::string> metrics{"abs_rb", "mse", "abs_one_minus_er", "cr", "ratio_se"};

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort (data.csv, schema.json, truth.json)");
  add_common(synth, common, false);

  auto* ampute_cmd = app.add_subcommand("ampute", "Amputate a complete dataset A times (--config: amputation plan)");
  add_common(ampute_cmd, common, true);
  ampute_cmd->add_option("--data", data, "Complete CSV")->required()->check(CLI::ExistingFile);
  ampute_cmd->add_option("--schema", schema, "Schema JSON")->required()->check(CLI::ExistingFile);

  auto* diagnose = app.add_subcommand("diagnose", "Missingness patterns and Little's MCAR test");
  add_common(diagnose, common, false);
  diagnose->add_option("--data", data, "CSV with missing cells")->required()->check(CLI::ExistingFile);
  diagnose->add_option("--schema", schema, "Schema JSON")->required()->check(CLI::ExistingFile);

  auto* impute_cmd = app.add_subcommand("impute", "Impute one dataset m times (--config: method JSON)");
  add_common(impute_cmd, common, true);
  impute_cmd->add_option("--data", data, "CSV with missing cells")->required()->check(CLI::ExistingFile);
  impute_cmd->add_option("--schema", schema, "Schema JSON")->required()->check(CLI::ExistingFile);
  impute_cmd->add_option("-m,--imputations", m, "Number of imputations")->check(CLI::Range(2, 10000));

  auto* estimate = app.add_subcommand("estimate", "Fit the outcome models; several --data files are pooled");
  add_common(estimate, common, false);
  estimate->add_option("--data", data_many, "Complete CSV files")->required()->check(CLI::ExistingFile);
  estimate->add_option("--schema", schema, "Schema JSON")->required()->check(CLI::ExistingFile);
  estimate->add_option("--level", level, "Confidence level")->check(CLI::Range(0.5, 0.999999));

  auto* evaluate = app.add_subcommand("evaluate", "Run a full experiment (--config: experiment JSON)");
  add_common(evaluate, common, true);

  auto* report = app.add_subcommand("report", "Summary and win-tie-loss grids from saved reports");
  add_common(report, common, false);
  report->add_option("--reports", reports_dir, "Directory of report JSON files")->required()->check(CLI::ExistingDirectory);
  report->add_option("--alpha", alpha, "Wilcoxon level")->check(CLI::Range(1e-9, 0.5));
  report->add_option("--nominal", nominal, "Nominal coverage")->check(CLI::Range(0.5, 0.999999));
  report->add_option("--metrics", metrics, "Comparison metrics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*ampute_cmd) return cmd_ampute(common, data, schema);
    if (*diagnose) return cmd_diagnose(common, data, schema);
    if (*impute_cmd) return cmd_impute(common, data, schema, m);
    if (*estimate) return cmd_estimate(common, data_many, schema, level);
    if (*evaluate) return cmd_evaluate(common, evaluate->count("--out-dir") > 0);
    if (*report) return cmd_report(common, reports_dir, alpha, nominal, metrics);
  } catch (const Error& e) {
    std::cerr << "mieval: " << e.what() << "\n";
    if (e.kind() == ErrorKind::config) return kExitConfig;
    if (e.kind() == ErrorKind::infeasible || e.kind() == ErrorKind::convergence) return kExitMethod;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "mieval: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
