#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mieval/diagnostics.hpp"
#include "mieval/error.hpp"
#include "mieval/experiment.hpp"
#include "mieval/jm.hpp"
#include "mieval/pooling.hpp"

namespace py = pybind11;
using namespace mieval;

namespace {

// Tables cross the boundary as CSV text plus schema JSON; the Python side
// parses both with the standard library.
std::string csv_text(const Dataset& ds) {
  std::ostringstream out;
  write_csv(ds, out);
  return out.str();
}

Dataset dataset_from(const std::string& csv, const std::string& schema_json) {
  std::istringstream in(csv);
  return read_csv(in, schema_from_json(nlohmann::json::parse(schema_json)));
}

py::dict pooled_dict(const PooledEstimate& p) {
  py::dict d;
  d["m"] = p.m;
  d["qbar"] = p.qbar;
  d["within"] = p.within;
  d["between"] = p.between;
  d["total"] = p.total;
  d["se"] = p.se;
  d["df"] = p.df;
  d["lower"] = p.lower;
  d["upper"] = p.upper;
  d["fmi"] = p.fmi;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "mieval native core";

  static py::exception<Error> error(m, "MievalError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      // Prefix the kind so Python callers can branch on it.
      std::string kind;
      switch (e.kind()) {
        case ErrorKind::invalid_input: kind = "invalid_input"; break;
        case ErrorKind::config: kind = "config"; break;
        case ErrorKind::numerical: kind = "numerical"; break;
        case ErrorKind::convergence: kind = "convergence"; break;
        case ErrorKind::infeasible: kind = "infeasible"; break;
      }
      py::set_error(error, (kind + ": " + e.what()).c_str());
    }
  });

  m.def("version", [] { return std::string(version()); });

  m.def("rubin_pool", [](const Eigen::MatrixXd& q, const Eigen::MatrixXd& u, double level) {
    return pooled_dict(rubin_pool(q, u, level));
  }, py::arg("estimates"), py::arg("variances"), py::arg("level") = 0.95,
        "Pool m x d estimates and within-imputation variances.");

  m.def("recommend_m", [](double frac, const std::string& rule, double max_loss) {
    return recommend_m(frac, m_rule_from_string(rule), max_loss);
  }, py::arg("frac_incomplete"), py::arg("rule") = "von_hippel", py::arg("max_loss") = 0.05);

  m.def("relative_efficiency", &relative_efficiency, py::arg("gamma"), py::arg("m"));

  m.def("wilcoxon_signed_rank", [](const std::vector<double>& x, const std::vector<double>& y) {
    const auto r = wilcoxon_signed_rank(x, y);
    py::dict d;
    d["w_plus"] = r.w_plus;
    d["w_minus"] = r.w_minus;
    d["p_value"] = r.p_value;
    d["n_effective"] = r.n_effective;
    d["exact"] = r.exact;
    d["flags"] = r.flags;
    return d;
  }, py::arg("x"), py::arg("y"));

  m.def("little_mcar_test", [](const Eigen::MatrixXd& Y) {
    return to_json(little_mcar_test(Y)).dump();
  }, py::arg("Y"), "Little's test on a matrix with NaN for missing; returns JSON.");

  m.def("em_mvn", [](const Eigen::MatrixXd& Y, double tol, int max_iter) {
    EmConfig cfg;
    cfg.tol = tol;
    cfg.max_iter = max_iter;
    const auto fit = em_mvn(Y, cfg);
    py::dict d;
    d["mu"] = fit.mu;
    d["sigma"] = fit.sigma;
    d["loglik"] = fit.loglik_trace;
    d["iterations"] = fit.iterations;
    d["converged"] = fit.converged;
    return d;
  }, py::arg("Y"), py::arg("tol") = 1e-6, py::arg("max_iter") = 500);

  m.def("synth", [](const std::string& dataset_json) {
    const auto src = dataset_source_from_json(nlohmann::json::parse(dataset_json));
    if (!src.cohort) throw Error(ErrorKind::config, "synth needs a cohort specification");
    const auto [ds, truth] = generate_cohort(*src.cohort);
    return py::make_tuple(csv_text(ds), schema_to_json(ds.schema()).dump(), to_json(truth).dump());
  }, py::arg("dataset_json"), "Returns (csv, schema_json, truth_json).");

  m.def("ampute", [](const std::string& csv, const std::string& schema_json, const std::string& plan_json, int a) {
    const auto set = ampute(dataset_from(csv, schema_json), amputation_plan_from_json(nlohmann::json::parse(plan_json)), a);
    return py::make_tuple(csv_text(set.dataset), set.realized_prop);
  }, py::arg("csv"), py::arg("schema_json"), py::arg("plan_json"), py::arg("a") = 1);

  m.def("impute", [](const std::string& csv, const std::string& schema_json, const std::string& method_json, int m_sets,
                     std::uint64_t seed) {
    const auto sets = impute(dataset_from(csv, schema_json), method_from_json(nlohmann::json::parse(method_json)), m_sets, seed);
    // Encoding can change the columns, so each set carries its own schema.
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : sets) out.emplace_back(csv_text(s.dataset), schema_to_json(s.dataset.schema()).dump());
    return out;
  }, py::arg("csv"), py::arg("schema_json"), py::arg("method_json"), py::arg("m") = 5, py::arg("seed") = 1);

  m.def("run_experiment", [](const std::string& config_json, const std::string& base_dir) {
    const auto cfg = experiment_config_from_json(nlohmann::json::parse(config_json), base_dir);
    const auto result = run_experiment(cfg);
    nlohmann::json j{{"m", result.m}, {"artifacts", result.artifacts}, {"any_failed", result.any_failed}};
    nlohmann::json reports = nlohmann::json::array();
    for (const auto& r : result.reports) reports.push_back(to_json(r));
    j["reports"] = reports;
    return j.dump();
  }, py::arg("config_json"), py::arg("base_dir") = "", py::call_guard<py::gil_scoped_release>());
}
