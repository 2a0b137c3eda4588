#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "mieval/diagnostics.hpp"
#include "mieval/error.hpp"
#include "mieval/fcs.hpp"
#include "mieval/forest.hpp"
#include "mieval/jm.hpp"
#include "mieval/stats.hpp"

using namespace mieval;
using fixtures::NA;

namespace {

// Correlated mixed-type data with MCAR holes in every predictor.
Dataset mixed_dataset(std::size_t n, std::uint64_t seed, double rate = 0.2) {
  Rng rng(seed);
  std::vector<double> x(n), b(n), c(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = rng.normal();
    // One decimal, as recorded; exp(log(x)) does not return many of these.
    x[i] = std::round(std::exp(3.2 + 0.2 * z + 0.1 * rng.normal()) * 10) / 10;
    b[i] = z + rng.normal() > 0 ? 1 : 0;
    const double u = z + 0.7 * rng.normal();
    c[i] = u < -0.5 ? 0 : (u < 0.6 ? 1 : 2);
    y[i] = rng.uniform() < stats::logistic(-0.3 + 0.8 * z) ? 1 : 0;
  }
  auto mask = [&](std::vector<double>& v) {
    for (auto& e : v)
      if (rng.uniform() < rate) e = NA;
  };
  mask(x);
  mask(b);
  mask(c);
  auto xc = fixtures::numeric("x", x, {20, 25, 30});
  xc.spec.log_transform = true;
  return Dataset({xc, fixtures::binary("b", b), fixtures::categorical("c", {"lo", "mid", "hi"}, c),
                  fixtures::binary("y", y, Role::outcome)});
}

// Every observed cell of the encoded source survives unchanged.
void check_observed_kept(const Dataset& source, const Dataset& imputed) {
  REQUIRE(source.cols() == imputed.cols());
  for (std::size_t j = 0; j < source.cols(); ++j) {
    const auto& s = source.column(j);
    const auto& t = imputed.column(j);
    CHECK(t.missing_count() == 0);
    for (std::size_t i = 0; i < source.rows(); ++i)
      if (!s.missing[i]) REQUIRE(t.values[i] == s.values[i]);
  }
}

std::set<double> observed_support(const Column& c) {
  std::set<double> out;
  for (std::size_t i = 0; i < c.values.size(); ++i)
    if (!c.missing[i]) out.insert(c.values[i]);
  return out;
}

}  // namespace

TEST_CASE("pmm draws only observed values") {
  Rng rng(3);
  const Eigen::Index n = 200;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1;
    X(i, 1) = rng.normal();
    y[i] = std::round(10 * (X(i, 1) + rng.normal())) / 10;
  }
  Eigen::MatrixXd Xm(50, 2);
  for (Eigen::Index i = 0; i < 50; ++i) {
    Xm(i, 0) = 1;
    Xm(i, 1) = 3 * rng.normal();
  }
  const std::set<double> support(y.data(), y.data() + n);
  for (int k : {1, 3, 10}) {
    const auto imp = impute_pmm(y, X, Xm, k, rng);
    for (Eigen::Index i = 0; i < imp.size(); ++i) CHECK(support.count(imp[i]) == 1);
  }
}

TEST_CASE("norm draw follows the regression") {
  Rng rng(5);
  const Eigen::Index n = 4000;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1;
    X(i, 1) = rng.normal();
    y[i] = 2 + 3 * X(i, 1) + 0.5 * rng.normal();
  }
  Eigen::MatrixXd Xm = Eigen::MatrixXd::Ones(4000, 2);
  const auto imp = impute_norm(y, X, Xm, rng);
  const double mean = imp.mean();
  const double sd = std::sqrt((imp.array() - mean).square().mean());
  CHECK(mean == doctest::Approx(5.0).epsilon(0.01));
  CHECK(sd == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("logreg falls back to a ridge under separation") {
  Rng rng(8);
  Eigen::MatrixXd X(40, 2);
  Eigen::VectorXd y(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    X(i, 0) = 1;
    X(i, 1) = static_cast<double>(i) - 19.5;
    y[i] = X(i, 1) > 0 ? 1 : 0;
  }
  std::vector<std::string> flags;
  const auto imp = impute_logreg(y, X, X, rng, &flags);
  CHECK(std::find(flags.begin(), flags.end(), "logreg_ridge") != flags.end());
  for (Eigen::Index i = 0; i < imp.size(); ++i) CHECK((imp[i] == 0 || imp[i] == 1));
}

TEST_CASE("polyreg draws valid categories") {
  Rng rng(2);
  const Eigen::Index n = 600;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1;
    X(i, 1) = rng.normal();
    y[i] = X(i, 1) + 0.5 * rng.normal() > 0.3 ? 2 : (rng.uniform() < 0.5 ? 0 : 1);
  }
  const auto imp = impute_polyreg(y, 3, X, X, rng);
  std::vector<int> counts(3, 0), truth(3, 0);
  int high = 0, high_two = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    REQUIRE((imp[i] == 0 || imp[i] == 1 || imp[i] == 2));
    ++counts[static_cast<std::size_t>(imp[i])];
    ++truth[static_cast<std::size_t>(y[i])];
    if (X(i, 1) > 1) {
      ++high;
      high_two += imp[i] == 2 ? 1 : 0;
    }
  }
  for (int c = 0; c < 3; ++c) CHECK(std::abs(counts[static_cast<std::size_t>(c)] - truth[static_cast<std::size_t>(c)]) < 60);
  CHECK(high_two > 0.8 * high);
}

TEST_CASE("initial fill uses the mean and the mode") {
  const Dataset ds({fixtures::numeric("x", {1, NA, 3}), fixtures::binary("b", {1, 1, NA}),
                    fixtures::categorical("c", {"a", "b"}, {NA, 1, 0})});
  const auto f = initial_fill(ds);
  CHECK(f.column("x").values[1] == 2.0);
  CHECK(f.column("b").values[2] == 1.0);
  CHECK(f.column("c").values[0] == 0.0);
  CHECK(f.complete());
}

TEST_CASE("FCS variants keep observed cells and are reproducible") {
  const auto ds = mixed_dataset(300, 1);
  struct Case {
    FcsVariant variant;
    bool ohn, ohc;
  };
  for (const Case& k : {Case{FcsVariant::default_, false, false}, Case{FcsVariant::norm, false, true},
                        Case{FcsVariant::logreg, true, true}}) {
    FcsConfig cfg;
    cfg.variant = k.variant;
    cfg.one_hot_numeric_bins = k.ohn;
    cfg.one_hot_categorical = k.ohc;
    cfg.m = 2;
    cfg.max_iter = 5;
    cfg.seed = 17;
    const auto sets = run_fcs(ds, cfg);
    REQUIRE(sets.size() == 2);
    const auto source = encode_for_imputation(ds, k.ohn, k.ohc);
    for (const auto& s : sets) check_observed_kept(source, s.dataset);
    CHECK_FALSE(sets[0].dataset == sets[1].dataset);
    cfg.threads = 2;
    const auto again = run_fcs(ds, cfg);
    CHECK(again[1].dataset == sets[1].dataset);
    if (k.variant == FcsVariant::default_) {
      // pmm copies observed values on the original scale.
      const auto support = observed_support(ds.column("x"));
      for (double v : sets[0].dataset.column("x").values) CHECK(support.count(v) == 1);
    }
    if (k.variant == FcsVariant::norm) {
      const auto& b = sets[0].dataset.column("b");
      CHECK(b.spec.kind == Kind::numeric);
      CHECK(b.spec.indicator_of == "b");
    }
  }
}

TEST_CASE("FCS config validation and JSON") {
  FcsConfig cfg;
  cfg.variant = FcsVariant::logreg;
  CHECK_THROWS_AS(run_fcs(mixed_dataset(50, 2), cfg), Error);
  const auto j = nlohmann::json::parse(R"({"variant": "norm", "m": 7, "visit_order": "revmonotone"})");
  const auto c = fcs_config_from_json(j);
  CHECK(c.variant == FcsVariant::norm);
  CHECK(c.m == 7);
  CHECK(c.visit_order == VisitOrder::revmonotone);
  CHECK(fcs_config_from_json(to_json(c)).m == 7);
  CHECK_THROWS_AS(fcs_config_from_json(nlohmann::json::parse(R"({"variant": "cart"})")), Error);
}

TEST_CASE("imputing a missing outcome requires outcomes in the model") {
  auto ds = mixed_dataset(100, 4);
  auto y = ds.column("y");
  y.values[0] = NA;
  y.missing[0] = 1;
  ds = ds.with_column(ds.index_of("y"), y);
  FcsConfig cfg;
  cfg.include_outcomes = false;
  CHECK_THROWS_AS(run_fcs(ds, cfg), Error);
}

TEST_CASE("EM matches the bivariate monotone closed form") {
  Rng rng(21);
  const Eigen::Index n = 400;
  Eigen::MatrixXd Y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = rng.normal();
    Y(i, 0) = 1 + a;
    Y(i, 1) = -2 + 0.6 * a + 0.8 * rng.normal();
    if (Y(i, 0) > 1.3 && rng.uniform() < 0.7) Y(i, 1) = NA;
  }
  // Closed form: y1 from all rows, regression of y2 on y1 from complete rows.
  double m1 = Y.col(0).mean();
  double s11 = (Y.col(0).array() - m1).square().mean();
  double nc = 0, a1 = 0, a2 = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isnan(Y(i, 1))) {
      ++nc;
      a1 += Y(i, 0);
      a2 += Y(i, 1);
    }
  a1 /= nc;
  a2 /= nc;
  double c11 = 0, c12 = 0, c22 = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isnan(Y(i, 1))) {
      c11 += (Y(i, 0) - a1) * (Y(i, 0) - a1);
      c12 += (Y(i, 0) - a1) * (Y(i, 1) - a2);
      c22 += (Y(i, 1) - a2) * (Y(i, 1) - a2);
    }
  const double b = c12 / c11;
  const double resid = (c22 - b * c12) / nc;
  const double mu2 = a2 + b * (m1 - a1);
  EmConfig cfg;
  cfg.tol = 1e-15;
  cfg.max_iter = 20000;
  const auto fit = em_mvn(Y, cfg);
  CHECK(std::abs(fit.mu[0] - m1) < 1e-6);
  CHECK(std::abs(fit.mu[1] - mu2) < 1e-6);
  CHECK(std::abs(fit.sigma(0, 0) - s11) < 1e-6);
  CHECK(std::abs(fit.sigma(0, 1) - b * s11) < 1e-6);
  CHECK(std::abs(fit.sigma(1, 1) - (resid + b * b * s11)) < 1e-6);
  for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t)
    CHECK(fit.loglik_trace[t] >= fit.loglik_trace[t - 1] - 1e-9 * std::abs(fit.loglik_trace[t - 1]));
  CHECK(mvn_observed_loglik(Y, fit.mu, fit.sigma) == doctest::Approx(fit.loglik_trace.back()));
}

TEST_CASE("EM flags non-convergence instead of failing") {
  const auto ds = mixed_dataset(200, 6, 0.4);
  Eigen::MatrixXd Y(200, 2);
  for (Eigen::Index i = 0; i < 200; ++i) {
    Y(i, 0) = ds.column("x").missing[static_cast<std::size_t>(i)] ? NA : ds.column("x").values[static_cast<std::size_t>(i)];
    Y(i, 1) = ds.column("b").missing[static_cast<std::size_t>(i)] ? NA : ds.column("b").values[static_cast<std::size_t>(i)];
  }
  EmConfig cfg;
  cfg.max_iter = 1;
  cfg.tol = 1e-14;
  const auto fit = em_mvn(Y, cfg);
  CHECK(std::find(fit.flags.begin(), fit.flags.end(), "em_not_converged") != fit.flags.end());
}

TEST_CASE("JM imputer keeps observed cells") {
  const auto ds = mixed_dataset(300, 9);
  JmConfig cfg;
  cfg.m = 3;
  cfg.seed = 4;
  const auto sets = run_jm_imputer(ds, cfg);
  const auto source = encode_for_imputation(ds, false, true);
  for (const auto& s : sets) {
    check_observed_kept(source, s.dataset);
    CHECK(s.dataset.column("b").spec.kind == Kind::numeric);
  }
  CHECK(run_jm_imputer(ds, cfg)[2].dataset == sets[2].dataset);
}

TEST_CASE("forest learns a step and class proportions") {
  Rng rng(12);
  const Eigen::Index n = 1000;
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n), cls(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) X(i, k) = rng.normal();
    y[i] = (X(i, 0) > 0 ? 5.0 : -5.0) + 0.1 * rng.normal();
    cls[i] = X(i, 1) > 0.5 ? 2 : (X(i, 1) > -0.5 ? 1 : 0);
  }
  ForestParams params;
  params.n_trees = 30;
  params.mtry = 3;
  const auto reg = fit_forest(X, y, ForestKind::regression, params, 1);
  Eigen::MatrixXd probe(2, 3);
  probe << 1, 0, 0, -1, 0, 0;
  const auto pred = reg.predict(probe);
  CHECK(pred[0] == doctest::Approx(5.0).epsilon(0.05));
  CHECK(pred[1] == doctest::Approx(-5.0).epsilon(0.05));
  const double oob_err = (reg.oob_prediction() - y).array().abs().mean();
  CHECK(oob_err < 0.5);

  const auto clf = fit_forest(X, cls, ForestKind::classification, params, 2, 3);
  Eigen::MatrixXd probe2(1, 3);
  probe2 << 0, 1.5, 0;
  const auto p = clf.predict_proba(probe2);
  CHECK(p.row(0).sum() == doctest::Approx(1.0));
  CHECK(p(0, 2) > 0.9);
  CHECK(clf.oob_proba().rows() == n);

  const auto again = fit_forest(X, y, ForestKind::regression, params, 1);
  CHECK(again.predict(probe) == pred);
  CHECK_THROWS_AS(fit_forest(X.topRows(5), y.head(5), ForestKind::regression, params, 1), Error);
}

TEST_CASE("forest imputer keeps observed cells") {
  const auto ds = mixed_dataset(300, 10);
  ForestConfig cfg;
  cfg.forest.n_trees = 10;
  cfg.max_iter = 3;
  cfg.m = 2;
  for (int donors : {0, 3}) {
    cfg.pmm_donors = donors;
    const auto sets = run_forest_imputer(ds, cfg);
    const auto source = encode_for_imputation(ds, false, false);
    for (const auto& s : sets) check_observed_kept(source, s.dataset);
    if (donors > 0) {
      const auto support = observed_support(ds.column("x"));
      for (double v : sets[0].dataset.column("x").values) CHECK(support.count(v) == 1);
    }
  }
}

TEST_CASE("Little's test fixtures") {
  SUBCASE("complete data") {
    Eigen::MatrixXd Y(5, 2);
    Y << 1, 2, 2, 1, 3, 5, 4, 3, 5, 4;
    const auto r = little_mcar_test(Y);
    CHECK(r.d2 == 0.0);
    CHECK(r.df == 0.0);
    CHECK(r.p_value == 1.0);
    CHECK(r.n_patterns == 1);
  }
  SUBCASE("df counts observed blocks") {
    Rng rng(1);
    Eigen::MatrixXd Y(90, 3);
    for (Eigen::Index i = 0; i < 90; ++i) {
      const double z = rng.normal();
      Y(i, 0) = z + rng.normal();
      Y(i, 1) = z + rng.normal();
      Y(i, 2) = z + rng.normal();
      if (i % 3 == 1) Y(i, 2) = NA;
      if (i % 3 == 2) Y(i, 1) = Y(i, 2) = NA;
    }
    const auto r = little_mcar_test(Y);
    CHECK(r.df == 3.0);
    CHECK(r.n_patterns == 3);
    CHECK(r.d2 >= 0.0);
    // Mahalanobis form: affine rescaling leaves d2 unchanged.
    Eigen::MatrixXd Z = Y;
    Z.col(1) = (Z.col(1).array() * 7.5 + 3.0).matrix();
    CHECK(std::abs(little_mcar_test(Z).d2 - r.d2) < 1e-8);
  }
  SUBCASE("dataset interface") {
    const auto ds = mixed_dataset(400, 3);
    const auto r = little_mcar_test(ds);
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
    CHECK(r.df > 0);
  }
}
