#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "mieval/error.hpp"
#include "mieval/evaluation.hpp"
#include "mieval/rng.hpp"
#include "mieval/synth.hpp"

using namespace mieval;
using fixtures::NA;

namespace {

EstimateVector gold_vector(std::vector<std::string> names, std::vector<double> q, std::vector<double> se) {
  EstimateVector e;
  e.names = std::move(names);
  e.q = Eigen::Map<Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
  e.se = Eigen::Map<Eigen::VectorXd>(se.data(), static_cast<Eigen::Index>(se.size()));
  e.var = e.se.cwiseAbs2();
  return e;
}

// Brute force over all 2^n sign assignments of the (mid)ranks.
double brute_force_p(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != y[i]) d.push_back(x[i] - y[i]);
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++less;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    rank[i] = less + (equal + 1) / 2;
  }
  double total = 0, obs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += rank[i];
    if (d[i] > 0) obs += rank[i];
  }
  const double dev = std::abs(2 * obs - total);
  std::size_t extreme = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += rank[i];
    if (std::abs(2 * s - total) >= dev - 1e-9) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(std::size_t{1} << n);
}

Dataset gaussian_data(std::size_t n, std::uint64_t seed) { return generate_cohort(gaussian_cohort_spec(n, seed)).first; }

AmputationPlan gaussian_plan(int A, double prop) {
  AmputationPlan p;
  p.mechanism = Mechanism::mar;
  p.patterns = {{"x1"}, {"x2"}};
  p.pattern_freqs = {0.5, 0.5};
  p.overall_prop = prop;
  p.A = A;
  p.seed = 11;
  return p;
}

MethodReport fake_report(const std::string& id, std::vector<std::vector<double>> rb_per_outcome) {
  MethodReport r;
  r.id = id;
  for (std::size_t o = 0; o < rb_per_outcome.size(); ++o) {
    OutcomeMetrics m;
    m.outcome = "y" + std::to_string(o);
    const auto& v = rb_per_outcome[o];
    for (std::size_t i = 0; i < v.size(); ++i) m.predictors.push_back("p" + std::to_string(i));
    m.rb = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    m.mse = m.rb.cwiseAbs2();
    m.er = (1.0 + m.rb.array()).matrix();
    m.cr = Eigen::VectorXd::Constant(m.rb.size(), 0.95);
    m.ratio_se = Eigen::VectorXd::Ones(m.rb.size());
    r.outcomes.push_back(m);
  }
  return r;
}

}  // namespace

TEST_CASE("metrics on a two-amputation fixture") {
  const auto gold = gold_vector({"b"}, {1.0}, {0.1});
  Eigen::MatrixXd q(2, 1), se(2, 1), lo(2, 1), up(2, 1);
  q << 0.8, 1.0;
  se << 0.1, 0.2;
  lo << 0.6, 0.7;
  up << 0.95, 1.3;
  const auto m = compute_metrics("y", gold, q, se, lo, up);
  CHECK(m.rb[0] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(m.er[0] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(m.mse[0] == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(m.cr[0] == doctest::Approx(0.5));
  CHECK(m.ratio_se[0] == doctest::Approx(1.5));
  CHECK(m.mse[0] >= m.rb[0] * m.rb[0]);
}

TEST_CASE("metrics suppress ER near zero and flag coverage") {
  const auto gold = gold_vector({"a", "b"}, {1e-8, 2.0}, {0.1, 0.1});
  Eigen::MatrixXd q(1, 2), se(1, 2), lo(1, 2), up(1, 2);
  q << 0.1, 2.5;
  se << 0.1, 0.1;
  lo << -1, 2.4;
  up << 1, 2.6;
  const auto m = compute_metrics("y", gold, q, se, lo, up);
  CHECK(std::isnan(m.er[0]));
  CHECK(m.er[1] == doctest::Approx(1.25));
  CHECK(m.mean_er == doctest::Approx(1.25));
  bool optimistic = false, inefficient = false;
  for (const auto& f : m.flags) {
    optimistic = optimistic || f.rfind("too optimistic", 0) == 0;
    inefficient = inefficient || f.rfind("possibly inefficient", 0) == 0;
  }
  CHECK(optimistic);
  CHECK(inefficient);
}

TEST_CASE("wilcoxon small examples") {
  auto r = wilcoxon_signed_rank({1, 2, 3}, {3, 4, 5});
  CHECK(r.p_value == doctest::Approx(0.25));
  CHECK(r.exact);
  r = wilcoxon_signed_rank({2, 3, 4, 5, 6}, {1, 1, 1, 1, 1});
  CHECK(r.p_value == doctest::Approx(0.0625));
  r = wilcoxon_signed_rank({1, 2, 3}, {1, 2, 3});
  CHECK(r.p_value == 1.0);
  REQUIRE(r.flags.size() == 1);
  CHECK(r.flags[0] == "no signal");
  CHECK_THROWS_AS(wilcoxon_signed_rank({1, 2}, {1}), Error);
}

TEST_CASE("wilcoxon exact agrees with enumeration, ties included") {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(10);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values produce ties and zero differences.
      x[i] = static_cast<double>(rng.below(6));
      y[i] = static_cast<double>(rng.below(6));
    }
    const auto r = wilcoxon_signed_rank(x, y);
    REQUIRE(r.p_value == doctest::Approx(brute_force_p(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("wilcoxon normal approximation for larger samples") {
  std::vector<double> x(30), y(30, 0.0);
  for (int i = 0; i < 30; ++i) x[static_cast<std::size_t>(i)] = i % 3 == 0 ? -(i + 1.0) : i + 1.0;
  const auto r = wilcoxon_signed_rank(x, y);
  CHECK_FALSE(r.exact);
  CHECK(r.p_value > 0);
  CHECK(r.p_value < 1);
  CHECK(r.w_plus + r.w_minus == doctest::Approx(30.0 * 31 / 2));
}

TEST_CASE("win-tie-loss grid is antisymmetric and counts outcomes") {
  std::vector<double> small(12), big(12);
  for (int i = 0; i < 12; ++i) {
    small[static_cast<std::size_t>(i)] = 0.01 * (i + 1);
    big[static_cast<std::size_t>(i)] = 0.5 + 0.01 * i;
  }
  std::vector<MethodReport> reports{fake_report("good", {small, small}), fake_report("bad", {big, big}),
                                    fake_report("same", {small, small})};
  for (auto metric : {WtlMetric::abs_rb, WtlMetric::mse, WtlMetric::abs_one_minus_er, WtlMetric::cr, WtlMetric::ratio_se}) {
    const auto g = win_tie_loss(reports, metric);
    CHECK(g.grid == -g.grid.transpose());
    CHECK(g.grid.diagonal().isZero());
  }
  const auto g = win_tie_loss(reports, WtlMetric::abs_rb);
  CHECK(g.grid(0, 1) == 2);
  CHECK(g.grid(1, 2) == -2);
  CHECK(g.grid(0, 2) == 0);
  CHECK(win_tie_loss(reports, WtlMetric::cr).grid.isZero());
  std::ostringstream out;
  write_wtl_csv(g, out);
  CHECK(out.str().rfind("method,good,bad,same\ngood,0,2,0\n", 0) == 0);
}

TEST_CASE("method specifications round-trip and reject unknown keys") {
  const auto m = method_from_json({{"method", "fcs"}, {"variant", "norm"}, {"include_outcomes", false}, {"one_hot_categorical", true}});
  CHECK(m.kind == MethodKind::fcs);
  CHECK(method_id(m) == "fcs-norm_noout_noohn_ohc_monotone");
  const auto again = method_from_json(to_json(m));
  CHECK(to_json(again) == to_json(m));
  CHECK(hex_fingerprint(to_json(again)) == hex_fingerprint(to_json(m)));
  CHECK(hex_fingerprint(to_json(m)).size() == 16);
  CHECK_THROWS_AS(method_from_json({{"method", "fcs"}, {"variantt", "norm"}}), Error);
  CHECK_THROWS_AS(method_from_json({{"method", "mice"}}), Error);
  CHECK(method_id(method_from_json({{"method", "oracle"}})) == "oracle");
  CHECK(method_id(method_from_json({{"method", "ipw"}, {"prob_model", "forest"}})) == "ipw-forest_noout_noohn");
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("gold standard requires complete data") {
  const Dataset ds = gaussian_data(300, 3);
  const auto outcomes = outcomes_of(ds);
  REQUIRE(outcomes.size() == 1);
  const auto gold = gold_standard(ds, outcomes);
  CHECK(gold.predictors == std::vector<std::string>{"x1", "x2", "x3"});
  Column holed = ds.column(0);
  holed.missing[0] = 1;
  holed.values[0] = NA;
  CHECK_THROWS_WITH_AS(gold_standard(ds.with_column(0, holed), outcomes), doctest::Contains("not complete"), Error);
}

TEST_CASE("oracle reproduces the gold standard exactly") {
  const Dataset ds = gaussian_data(400, 4);
  const auto gold = gold_standard(ds, outcomes_of(ds));
  EvalSettings s;
  s.m = 3;
  const auto r = evaluate_method(ds, gold, method_from_json({{"method", "oracle"}}), gaussian_plan(4, 0.3), s);
  REQUIRE_FALSE(r.failed);
  CHECK(r.succeeded == 4);
  for (const auto& o : r.outcomes) {
    CHECK(o.rb.isZero(0));
    CHECK(o.mse.isZero(0));
    CHECK((o.cr.array() == 1.0).all());
    CHECK((o.ratio_se.array() == 1.0).all());
    CHECK((o.er.array() == 1.0).all());
  }
}

TEST_CASE("evaluation is deterministic and independent of thread count") {
  const Dataset ds = gaussian_data(300, 6);
  const auto gold = gold_standard(ds, outcomes_of(ds));
  EvalSettings s;
  s.m = 3;
  const auto method = method_from_json({{"method", "fcs"}, {"variant", "norm"}, {"one_hot_categorical", true}});
  const auto a = evaluate_method(ds, gold, method, gaussian_plan(3, 0.3), s);
  s.threads = 3;
  const auto b = evaluate_method(ds, gold, method, gaussian_plan(3, 0.3), s);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(a.mean_mse > 0);
  std::ostringstream csv;
  write_report_csv(a, csv);
  CHECK(csv.str().find("\n" + a.id + ",fcs,norm,TRUE,FALSE,TRUE,monotone,") != std::string::npos);
}

TEST_CASE("a method fails when too few amputations succeed") {
  const Dataset ds = gaussian_data(300, 7);
  const auto gold = gold_standard(ds, outcomes_of(ds));
  // Every predictor can go missing, so IPW has nothing fully observed to model.
  AmputationPlan plan;
  plan.mechanism = Mechanism::mcar;
  plan.per_variable_rates = {{"x1", 0.2}, {"x2", 0.2}, {"x3", 0.2}};
  plan.A = 3;
  const auto r = evaluate_method(ds, gold, method_from_json({{"method", "ipw"}}), plan, EvalSettings{});
  CHECK(r.failed);
  CHECK(r.succeeded == 0);
  REQUIRE(r.amputations.size() == 3);
  CHECK(r.amputations[0].error.find("IPW infeasible") != std::string::npos);
}

TEST_CASE("ipw: unit weights match the unweighted complete-case fit") {
  const Dataset ds = gaussian_data(500, 8);
  const auto amp = ampute(ds, gaussian_plan(1, 0.3), 1);
  const auto outcome = outcomes_of(ds).front();
  MissingnessModel model;
  model.complete = amp.dataset.complete_rows();
  model.prob = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(ds.rows()));
  const auto e = ipw_estimates(amp.dataset, model, outcome, {"x1", "x2", "x3"}, IpwConfig{});
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < model.complete.size(); ++i)
    if (model.complete[i]) rows.push_back(i);
  const auto plain = fit_outcome(binarize_for_estimation(amp.dataset.select_rows(rows)), outcome, {"x1", "x2", "x3"}, nullptr);
  CHECK((e.q - plain.q).cwiseAbs().maxCoeff() == 0.0);
  CHECK((e.se - plain.se).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ipw: missingness models") {
  const Dataset ds = gaussian_data(800, 9);
  const auto amp = ampute(ds, gaussian_plan(1, 0.4), 1);
  IpwConfig cfg;
  const auto logistic = fit_missingness_model(amp.dataset, cfg);
  CHECK(logistic.predictors == std::vector<std::string>{"x3"});
  CHECK((logistic.prob.array() > 0).all());
  CHECK((logistic.prob.array() < 1).all());
  cfg.include_outcomes = true;
  CHECK(fit_missingness_model(amp.dataset, cfg).predictors == std::vector<std::string>{"x3", "y"});

  cfg.prob_model = ProbModel::forest;
  cfg.forest.n_trees = 20;
  const auto forest = fit_missingness_model(amp.dataset, cfg);
  CHECK(forest.prob.minCoeff() >= 1.0 / 40 - 1e-15);
  CHECK(forest.prob.maxCoeff() <= 1.0);

  const auto w = ipw_weights(logistic, IpwConfig{});
  CHECK(w.minCoeff() >= 1.0);
  IpwConfig capped;
  capped.weight_cap_quantile = 0.9;
  const auto wc = ipw_weights(logistic, capped);
  CHECK(wc.maxCoeff() < w.maxCoeff());
  capped.weight_cap_quantile = 0.5;
  CHECK_THROWS_AS(ipw_weights(logistic, capped), Error);
}

TEST_CASE("ipw: infeasible without a fully observed predictor") {
  auto x = std::vector<double>{1, NA, 3, 4, 5, 6};
  auto y = std::vector<double>{0, 1, 0, 1, 1, 0};
  const Dataset ds({fixtures::numeric("x", x), fixtures::binary("y", y, Role::outcome)});
  IpwConfig cfg;
  cfg.include_outcomes = true;
  CHECK_THROWS_WITH_AS(fit_missingness_model(ds, cfg), doctest::Contains("IPW infeasible"), Error);
  try {
    fit_missingness_model(ds, cfg);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::infeasible);
  }
}
