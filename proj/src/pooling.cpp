#include "mieval/pooling.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mieval/error.hpp"
#include "mieval/stats.hpp"

namespace mieval {

PooledEstimate rubin_pool(const Eigen::MatrixXd& estimates, const Eigen::MatrixXd& variances, double level) {
  const Eigen::Index m = estimates.rows(), d = estimates.cols();
  if (m < 2) fail(ErrorKind::invalid_input, "rubin_pool: at least 2 imputations are required");
  if (variances.rows() != m || variances.cols() != d) fail(ErrorKind::invalid_input, "rubin_pool: shape mismatch");
  if ((variances.array() < 0).any()) fail(ErrorKind::invalid_input, "rubin_pool: negative variance");

  PooledEstimate p;
  p.m = static_cast<int>(m);
  const double md = static_cast<double>(m);
  p.qbar.resize(d);
  p.within.resize(d);
  p.between.resize(d);
  p.total.resize(d);
  p.se.resize(d);
  p.df.resize(d);
  p.lower.resize(d);
  p.upper.resize(d);
  p.fmi.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    // Means as first value plus mean deviation: identical replicates pool exactly.
    const double q0 = estimates(0, k), v0 = variances(0, k);
    double dq = 0, dv = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      dq += estimates(j, k) - q0;
      dv += variances(j, k) - v0;
    }
    const double qbar = q0 + dq / md;
    const double w = v0 + dv / md;
    double ss = 0;
    for (Eigen::Index j = 0; j < m; ++j) ss += (estimates(j, k) - qbar) * (estimates(j, k) - qbar);
    const double b = ss / (md - 1.0);
    const double t = w + (1.0 + 1.0 / md) * b;
    double df = stats::inf;
    if (b > 0) {
      const double r = w / ((1.0 + 1.0 / md) * b);
      df = (md - 1.0) * (1.0 + r) * (1.0 + r);
    }
    p.qbar[k] = qbar;
    p.within[k] = w;
    p.between[k] = b;
    p.total[k] = t;
    p.se[k] = std::sqrt(t);
    p.df[k] = df;
    const auto ci = wald_ci(qbar, p.se[k], df, level);
    p.lower[k] = ci.lower;
    p.upper[k] = ci.upper;
    p.fmi[k] = (w + b) > 0 ? b / (w + b) : 0.0;
  }
  return p;
}

PooledEstimate rubin_pool(const std::vector<EstimateVector>& fits, double level) {
  if (fits.empty()) fail(ErrorKind::invalid_input, "rubin_pool: no fits");
  const auto m = static_cast<Eigen::Index>(fits.size());
  const auto d = static_cast<Eigen::Index>(fits.front().size());
  Eigen::MatrixXd q(m, d), v(m, d);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& f = fits[static_cast<std::size_t>(j)];
    if (f.names != fits.front().names) fail(ErrorKind::invalid_input, "rubin_pool: predictor lists differ");
    q.row(j) = f.q.transpose();
    v.row(j) = f.var.transpose();
  }
  auto p = rubin_pool(q, v, level);
  p.names = fits.front().names;
  return p;
}

double relative_efficiency(double gamma0, int m) { return 1.0 + gamma0 / static_cast<double>(m); }

MRule m_rule_from_string(std::string_view s) {
  if (s == "von_hippel") return MRule::von_hippel;
  if (s == "white") return MRule::white;
  if (s == "bodner") return MRule::bodner;
  if (s == "rubin_default") return MRule::rubin_default;
  if (s == "graham") return MRule::graham;
  fail(ErrorKind::config, "unknown m rule '" + std::string(s) + "'");
}

std::string_view to_string(MRule rule) {
  switch (rule) {
    case MRule::von_hippel: return "von_hippel";
    case MRule::white: return "white";
    case MRule::bodner: return "bodner";
    case MRule::rubin_default: return "rubin_default";
    case MRule::graham: return "graham";
  }
  return "?";
}

int recommend_m(double frac, MRule rule, double max_loss) {
  if (!(frac >= 0.0 && frac <= 1.0)) fail(ErrorKind::invalid_input, "recommend_m: fraction must lie in [0, 1]");
  // Absorb representation error: 0.42 * 100 is 42.000000000000007.
  auto ceil_tol = [](double x) { return static_cast<int>(std::ceil(x - 1e-9)); };
  int m = 0;
  switch (rule) {
    case MRule::von_hippel: m = ceil_tol(100.0 * frac); break;
    case MRule::white:
      if (!(max_loss > 0)) fail(ErrorKind::config, "recommend_m: white rule needs max_loss > 0");
      m = ceil_tol(frac / max_loss);
      break;
    case MRule::bodner: {
      static constexpr std::array<double, 5> fmi{0.05, 0.1, 0.2, 0.3, 0.5};
      static constexpr std::array<int, 5> count{3, 6, 12, 24, 59};
      m = std::max(count.back(), ceil_tol(100.0 * frac));
      for (std::size_t k = 0; k < fmi.size(); ++k) {
        if (frac <= fmi[k] + 1e-12) {
          m = count[k];
          break;
        }
      }
      break;
    }
    case MRule::rubin_default: m = 5; break;
    case MRule::graham: m = 20; break;
  }
  return std::max(m, 2);
}

}  // namespace mieval
