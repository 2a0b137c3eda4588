#include "mieval/diagnostics.hpp"

#include <cmath>
#include <map>

#include "mieval/error.hpp"
#include "mieval/jm.hpp"
#include "mieval/stats.hpp"

namespace mieval {

nlohmann::json to_json(const McarTestResult& r) {
  return {{"d2", r.d2}, {"df", r.df}, {"p_value", r.p_value}, {"n_patterns", r.n_patterns}, {"flags", r.flags}};
}

McarTestResult little_mcar_test(const Eigen::MatrixXd& Y) {
  const Eigen::Index n = Y.rows(), d = Y.cols();
  if (d < 2) fail(ErrorKind::invalid_input, "Little's test needs at least 2 variables");
  McarTestResult r;

  std::map<std::vector<std::uint8_t>, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::uint8_t> key(static_cast<std::size_t>(d));
    for (Eigen::Index k = 0; k < d; ++k) key[static_cast<std::size_t>(k)] = std::isnan(Y(i, k)) ? 1 : 0;
    groups[key].push_back(i);
  }
  r.n_patterns = groups.size();
  bool incomplete = false;
  for (const auto& [key, rows] : groups)
    for (auto b : key) incomplete |= b != 0;
  if (!incomplete) return r;  // single complete pattern: d2 = 0, df = 0, p = 1

  EmConfig cfg;
  cfg.tol = 1e-10;
  cfg.max_iter = 2000;
  const MvnFit fit = em_mvn(Y, cfg);
  r.flags = fit.flags;

  double df = 0;
  for (const auto& [key, rows] : groups) {
    std::vector<Eigen::Index> obs;
    for (Eigen::Index k = 0; k < d; ++k)
      if (!key[static_cast<std::size_t>(k)]) obs.push_back(k);
    if (obs.empty()) continue;
    const auto o = static_cast<Eigen::Index>(obs.size());
    df += static_cast<double>(o);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(o), mu(o);
    Eigen::MatrixXd s(o, o);
    for (Eigen::Index a = 0; a < o; ++a) {
      mu[a] = fit.mu[obs[static_cast<std::size_t>(a)]];
      for (Eigen::Index b = 0; b < o; ++b) s(a, b) = fit.sigma(obs[static_cast<std::size_t>(a)], obs[static_cast<std::size_t>(b)]);
    }
    for (Eigen::Index i : rows)
      for (Eigen::Index a = 0; a < o; ++a) mean[a] += Y(i, obs[static_cast<std::size_t>(a)]);
    mean /= static_cast<double>(rows.size());
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) {
      s.diagonal().array() += 1e-8;
      llt.compute(s);
      r.flags.push_back("pattern_ridge");
      if (llt.info() != Eigen::Success) fail(ErrorKind::numerical, "Little's test: singular pattern covariance");
    }
    const Eigen::VectorXd diff = mean - mu;
    r.d2 += static_cast<double>(rows.size()) * diff.dot(llt.solve(diff));
  }
  r.df = df - static_cast<double>(d);
  r.p_value = r.df > 0 ? stats::chi2_sf(r.d2, r.df) : 1.0;
  return r;
}

McarTestResult little_mcar_test(const Dataset& ds) {
  const Dataset b = binarize_for_estimation(ds);
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < b.cols(); ++j) {
    const auto& spec = b.column(j).spec;
    if (spec.role == Role::id || spec.kind == Kind::categorical) continue;
    cols.push_back(j);
  }
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(b.rows()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const auto& c = b.column(cols[k]);
    for (std::size_t i = 0; i < b.rows(); ++i) Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = c.values[i];
  }
  return little_mcar_test(Y);
}

}  // namespace mieval
