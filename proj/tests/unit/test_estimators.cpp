#include <doctest.h>

#include <cmath>

#include "mieval/error.hpp"
#include "mieval/estimators.hpp"
#include "mieval/rng.hpp"
#include "mieval/stats.hpp"

using namespace mieval;

namespace {

double logit(double p) { return std::log(p / (1 - p)); }

Eigen::MatrixXd random_design(Rng& rng, int n, int d) {
  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) X(i, k) = rng.uniform() * 2.0 - 1.0;
  return X;
}

}  // namespace

TEST_CASE("wald interval uses normal or t quantile") {
  const auto ci = wald_ci(1.0, 0.5);
  CHECK(ci.lower == doctest::Approx(1.0 - 1.959963984540054 * 0.5).epsilon(1e-12));
  const auto cit = wald_ci(0.0, 1.0, 4.0);
  CHECK(cit.upper == doctest::Approx(2.7764451051977987).epsilon(1e-10));
  const auto cinf = wald_ci(0.0, 1.0, stats::inf);
  CHECK(cinf.upper == doctest::Approx(1.959963984540054).epsilon(1e-12));
}

TEST_CASE("logistic with one binary predictor matches the 2x2 table") {
  // x=0: 30 rows, 9 events; x=1: 20 rows, 12 events.
  Eigen::MatrixXd X(50, 1);
  Eigen::VectorXd y(50);
  for (int i = 0; i < 50; ++i) {
    const bool x1 = i >= 30;
    X(i, 0) = x1 ? 1 : 0;
    y(i) = x1 ? (i - 30 < 12 ? 1 : 0) : (i < 9 ? 1 : 0);
  }
  const auto r = fit_logistic(X, y, {"x"});
  const double b = logit(12.0 / 20) - logit(9.0 / 30);
  CHECK(r.estimates.q[0] == doctest::Approx(b).epsilon(1e-9));
  CHECK(r.intercept == doctest::Approx(logit(0.3)).epsilon(1e-9));
  const double var = 1.0 / 12 + 1.0 / 8 + 1.0 / 9 + 1.0 / 21;
  CHECK(r.estimates.var[0] == doctest::Approx(var).epsilon(1e-7));
  CHECK(r.estimates.names == std::vector<std::string>{"x"});
  CHECK(r.estimates.n_used == 50);
}

TEST_CASE("logistic score vanishes at the fit and matches finite differences") {
  Rng rng(7);
  const int n = 400, d = 3;
  Eigen::MatrixXd X = random_design(rng, n, d);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double eta = 0.3 + X(i, 0) - 0.7 * X(i, 1);
    y(i) = rng.uniform() < stats::logistic(eta) ? 1 : 0;
  }
  Eigen::MatrixXd Xi(n, d + 1);
  Xi << Eigen::VectorXd::Ones(n), X;
  const auto fit = logistic_irls(Xi, y, nullptr);
  REQUIRE(fit.converged);
  Eigen::VectorXd score;
  logistic_loglik(Xi, y, nullptr, fit.beta, &score);
  CHECK(score.lpNorm<Eigen::Infinity>() < 1e-6);

  Eigen::VectorXd beta(d + 1);
  beta << 0.1, -0.2, 0.5, 0.3;
  logistic_loglik(Xi, y, nullptr, beta, &score);
  const double h = 1e-6;
  for (int k = 0; k <= d; ++k) {
    Eigen::VectorXd bp = beta, bm = beta;
    bp[k] += h;
    bm[k] -= h;
    const double fd = (logistic_loglik(Xi, y, nullptr, bp) - logistic_loglik(Xi, y, nullptr, bm)) / (2 * h);
    CHECK(score[k] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("logistic separation names the offending column") {
  Eigen::MatrixXd X(6, 2);
  X << 1, 0.3, 1, 0.1, 1, 0.9, 0, 0.5, 0, 0.2, 0, 0.8;
  Eigen::VectorXd y(6);
  y << 1, 1, 1, 0, 1, 0;
  CHECK_THROWS_WITH_AS(fit_logistic(X, y, {"sep", "z"}), doctest::Contains("sep"), Error);
}

TEST_CASE("logistic rejects single-class outcomes") {
  Eigen::MatrixXd X(3, 1);
  X << 0.1, 0.2, 0.3;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(fit_logistic(X, y, {"x"}), Error);
}

TEST_CASE("weighted logistic with unit weights keeps the point estimate") {
  Rng rng(11);
  const int n = 300;
  Eigen::MatrixXd X = random_design(rng, n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = rng.uniform() < stats::logistic(X(i, 0)) ? 1 : 0;
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  const auto a = fit_logistic(X, y, {"a", "b"});
  const auto b = fit_logistic(X, y, {"a", "b"}, &w);
  CHECK((a.estimates.q - b.estimates.q).lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK(b.estimates.weights_applied);
  // Sandwich and model variance agree to first order for a correct model.
  CHECK(b.estimates.var[0] == doctest::Approx(a.estimates.var[0]).epsilon(0.3));
}

TEST_CASE("cox three-subject oracle") {
  Eigen::MatrixXd X(3, 1);
  X << 1, 0, 1;
  Eigen::VectorXd t(3), e(3);
  t << 1, 2, 3;
  e << 1, 1, 0;
  const auto fit = fit_cox(X, t, e, {"x"});
  CHECK(fit.q[0] == doctest::Approx(-0.5 * std::log(2.0)).epsilon(1e-9));
  // Information at the root: u/(2u+1)^2*2 ... checked against the numeric second derivative.
  Eigen::VectorXd b(1);
  b << fit.q[0];
  const auto v = cox_breslow(X, t, e, nullptr, b);
  CHECK(std::abs(v.score[0]) < 1e-9);
  const double u = std::exp(fit.q[0]);
  const double info = 2 * u / ((2 * u + 1) * (2 * u + 1)) + u / ((1 + u) * (1 + u));
  CHECK(v.information(0, 0) == doctest::Approx(info).epsilon(1e-9));
  CHECK(fit.var[0] == doctest::Approx(1.0 / info).epsilon(1e-6));
}

TEST_CASE("cox score and information match finite differences with ties") {
  Rng rng(3);
  const int n = 120, d = 2;
  Eigen::MatrixXd X = random_design(rng, n, d);
  Eigen::VectorXd t(n), e(n);
  for (int i = 0; i < n; ++i) {
    t(i) = std::floor(rng.uniform() * 20.0);  // heavy ties
    e(i) = rng.uniform() < 0.7 ? 1 : 0;
  }
  Eigen::VectorXd beta(d);
  beta << 0.4, -0.3;
  const auto v = cox_breslow(X, t, e, nullptr, beta);
  const double h = 1e-6;
  for (int k = 0; k < d; ++k) {
    Eigen::VectorXd bp = beta, bm = beta;
    bp[k] += h;
    bm[k] -= h;
    const auto vp = cox_breslow(X, t, e, nullptr, bp);
    const auto vm = cox_breslow(X, t, e, nullptr, bm);
    CHECK(v.score[k] == doctest::Approx((vp.loglik - vm.loglik) / (2 * h)).epsilon(1e-5));
    for (int l = 0; l < d; ++l)
      CHECK(v.information(k, l) == doctest::Approx(-(vp.score[l] - vm.score[l]) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("cox flags covariates constant among events") {
  Eigen::MatrixXd X(5, 2);
  X << 1, 0.5, 1, -0.2, 0, 0.1, 1, 0.9, 0, 0.3;
  Eigen::VectorXd t(5), e(5);
  t << 1, 2, 3, 4, 5;
  e << 1, 1, 0, 1, 0;
  const auto fit = fit_cox(X, t, e, {"const_ev", "z"});
  CHECK(std::isnan(fit.q[0]));
  bool flagged = false;
  for (const auto& f : fit.flags) flagged |= f == "non_identifiable:const_ev";
  CHECK(flagged);
  CHECK(std::isfinite(fit.q[1]));
}

TEST_CASE("cox recovers a simulated log hazard ratio") {
  Rng rng(99);
  const int n = 3000;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd t(n), e(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = rng.uniform() < 0.5 ? 1 : 0;
    const double rate = 0.1 * std::exp(0.7 * X(i, 0));
    const double ti = -std::log(1 - rng.uniform()) / rate;
    t(i) = std::min(ti, 10.0);
    e(i) = ti <= 10.0 ? 1 : 0;
  }
  const auto fit = fit_cox(X, t, e, {"x"});
  CHECK(std::abs(fit.q[0] - 0.7) < 4 * fit.se[0]);
}
