#include <doctest.h>

#include <cmath>

#include "mieval/error.hpp"
#include "mieval/pooling.hpp"

using namespace mieval;

TEST_CASE("rubin pooling small fixtures") {
  SUBCASE("spread estimates") {
    Eigen::MatrixXd q(3, 1), v(3, 1);
    q << 1, 2, 3;
    v << 1, 1, 1;
    const auto p = rubin_pool(q, v);
    CHECK(p.qbar[0] == doctest::Approx(2.0));
    CHECK(p.within[0] == doctest::Approx(1.0));
    CHECK(p.between[0] == doctest::Approx(1.0));
    CHECK(p.total[0] == doctest::Approx(7.0 / 3.0));
    // r = W / ((1 + 1/m) B) = 3/4; df = 2 (1 + 3/4)^2
    CHECK(p.df[0] == doctest::Approx(2.0 * 1.75 * 1.75));
  }
  SUBCASE("zero within variance") {
    Eigen::MatrixXd q(4, 1), v(4, 1);
    q << 0, 0, 0, 4;
    v << 0, 0, 0, 0;
    const auto p = rubin_pool(q, v);
    CHECK(p.qbar[0] == doctest::Approx(1.0));
    CHECK(p.between[0] == doctest::Approx(4.0));
    CHECK(p.total[0] == doctest::Approx(5.0));
  }
  SUBCASE("identical replicates") {
    Eigen::MatrixXd q = Eigen::MatrixXd::Constant(5, 2, 0.123456789);
    Eigen::MatrixXd v = Eigen::MatrixXd::Constant(5, 2, 0.04);
    const auto p = rubin_pool(q, v);
    CHECK(p.qbar[0] == 0.123456789);
    CHECK(p.between[0] == 0.0);
    CHECK(p.total[0] == 0.04);
    CHECK(std::isinf(p.df[0]));
  }
}

TEST_CASE("rubin pooling reproduces a hand computation with m = 4") {
  // W = mean(v) = 0.25; B = var(q) = 5/3; T = 0.25 + 1.25 * 5/3.
  Eigen::MatrixXd q(4, 1), v(4, 1);
  q << 0, 1, 2, 3;
  v << 0.1, 0.2, 0.3, 0.4;
  const auto p = rubin_pool(q, v);
  CHECK(p.total[0] == doctest::Approx(0.25 + 1.25 * 5.0 / 3.0));
  CHECK(p.fmi[0] == doctest::Approx((5.0 / 3.0) / (0.25 + 5.0 / 3.0)));
}

TEST_CASE("rubin pooling input validation") {
  Eigen::MatrixXd q(1, 1), v(1, 1);
  q << 1;
  v << 1;
  CHECK_THROWS_AS(rubin_pool(q, v), Error);
  Eigen::MatrixXd q2(2, 1), v2(2, 1);
  q2 << 1, 2;
  v2 << 1, -1;
  CHECK_THROWS_AS(rubin_pool(q2, v2), Error);
}

TEST_CASE("relative efficiency") {
  CHECK(relative_efficiency(0.5, 5) == doctest::Approx(1.1));
  CHECK(relative_efficiency(0.0, 3) == 1.0);
}

TEST_CASE("number of imputations") {
  CHECK(recommend_m(0.42, MRule::von_hippel) == 42);
  CHECK(recommend_m(0.42, MRule::rubin_default) == 5);
  CHECK(recommend_m(0.42, MRule::graham) == 20);
  CHECK(recommend_m(0.42, MRule::white) == 9);
  CHECK(recommend_m(0.05, MRule::bodner) == 3);
  CHECK(recommend_m(0.1, MRule::bodner) == 6);
  CHECK(recommend_m(0.2, MRule::bodner) == 12);
  CHECK(recommend_m(0.3, MRule::bodner) == 24);
  CHECK(recommend_m(0.5, MRule::bodner) == 59);
  CHECK(recommend_m(0.25, MRule::bodner) == 24);
  CHECK(recommend_m(0.0, MRule::von_hippel) == 2);
  CHECK(recommend_m(1.0, MRule::von_hippel) == 100);
  CHECK_THROWS_AS(recommend_m(1.5, MRule::von_hippel), Error);
  CHECK(m_rule_from_string("bodner") == MRule::bodner);
  CHECK_THROWS_AS(m_rule_from_string("nope"), Error);
}
