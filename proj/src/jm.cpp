#include "mieval/jm.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "mieval/error.hpp"
#include "mieval/parallel.hpp"

namespace mieval {

namespace {

// Rows grouped by missingness pattern with observed-block sufficient statistics.
struct Pattern {
  std::vector<Eigen::Index> obs, mis;
  std::vector<Eigen::Index> rows;
  double n = 0;
  Eigen::VectorXd s;   // Σ c x_o
  Eigen::MatrixXd S;   // Σ c x_o x_oᵀ
};

std::vector<Pattern> group_patterns(const Eigen::MatrixXd& Y, const Eigen::VectorXd* counts) {
  const Eigen::Index n = Y.rows(), d = Y.cols();
  std::map<std::vector<std::uint8_t>, std::size_t> index;
  std::vector<Pattern> patterns;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = counts ? (*counts)[i] : 1.0;
    if (c < 0) fail(ErrorKind::invalid_input, "em_mvn: negative row count");
    std::vector<std::uint8_t> key(static_cast<std::size_t>(d));
    for (Eigen::Index k = 0; k < d; ++k) key[static_cast<std::size_t>(k)] = std::isnan(Y(i, k)) ? 1 : 0;
    auto [it, inserted] = index.emplace(key, patterns.size());
    if (inserted) {
      Pattern p;
      for (Eigen::Index k = 0; k < d; ++k) (key[static_cast<std::size_t>(k)] ? p.mis : p.obs).push_back(k);
      const auto o = static_cast<Eigen::Index>(p.obs.size());
      p.s = Eigen::VectorXd::Zero(o);
      p.S = Eigen::MatrixXd::Zero(o, o);
      patterns.push_back(std::move(p));
    }
    Pattern& p = patterns[it->second];
    p.rows.push_back(i);
    if (c == 0) continue;
    p.n += c;
    const auto o = static_cast<Eigen::Index>(p.obs.size());
    Eigen::VectorXd x(o);
    for (Eigen::Index k = 0; k < o; ++k) x[k] = Y(i, p.obs[static_cast<std::size_t>(k)]);
    p.s += c * x;
    p.S.selfadjointView<Eigen::Lower>().rankUpdate(x, c);
  }
  for (auto& p : patterns) p.S = p.S.selfadjointView<Eigen::Lower>();
  return patterns;
}

Eigen::MatrixXd sub(const Eigen::MatrixXd& A, const std::vector<Eigen::Index>& r, const std::vector<Eigen::Index>& c) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = A(r[i], c[j]);
  return out;
}

Eigen::VectorXd sub(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& r) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(r.size()));
  for (std::size_t i = 0; i < r.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[r[i]];
  return out;
}

// Conditional regression of the missing block on the observed block.
struct Conditional {
  Eigen::MatrixXd B;      // |mis| x |obs|
  Eigen::VectorXd c;      // μ_m − B μ_o
  Eigen::MatrixXd C;      // conditional covariance
  double loglik = 0.0;    // pattern's observed-data log-likelihood
  bool ok = true;
};

Conditional conditional(const Pattern& p, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
  Conditional out;
  const auto o = static_cast<Eigen::Index>(p.obs.size());
  const Eigen::VectorXd mu_o = sub(mu, p.obs), mu_m = sub(mu, p.mis);
  const Eigen::MatrixXd s_mm = sub(sigma, p.mis, p.mis);
  if (o == 0) {
    out.B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p.mis.size()), 0);
    out.c = mu_m;
    out.C = s_mm;
    return out;
  }
  const Eigen::MatrixXd s_oo = sub(sigma, p.obs, p.obs);
  Eigen::LLT<Eigen::MatrixXd> llt(s_oo);
  if (llt.info() != Eigen::Success) {
    out.ok = false;
    return out;
  }
  const Eigen::MatrixXd s_om = sub(sigma, p.obs, p.mis);
  out.B = llt.solve(s_om).transpose();
  out.c = mu_m - out.B * mu_o;
  out.C = s_mm - out.B * s_om;
  if (p.n > 0) {
    const Eigen::MatrixXd L = llt.matrixL();
    const double logdet = 2.0 * L.diagonal().array().log().sum();
    const Eigen::MatrixXd Q = p.S - p.s * mu_o.transpose() - mu_o * p.s.transpose() + p.n * mu_o * mu_o.transpose();
    const double quad = llt.solve(Q).trace();
    out.loglik = -0.5 * p.n * (static_cast<double>(o) * std::log(2.0 * std::numbers::pi) + logdet) - 0.5 * quad;
  }
  return out;
}

// Conditionals for every pattern, adding a ridge to sigma if any block fails.
std::vector<Conditional> all_conditionals(const std::vector<Pattern>& patterns, const Eigen::VectorXd& mu,
                                          Eigen::MatrixXd& sigma, double ridge_scale, bool& ridged) {
  for (int attempt = 0; attempt < 12; ++attempt) {
    std::vector<Conditional> out;
    bool ok = true;
    for (const auto& p : patterns) {
      out.push_back(conditional(p, mu, sigma));
      if (!out.back().ok) {
        ok = false;
        break;
      }
    }
    if (ok) return out;
    const double scale = std::max(sigma.diagonal().mean(), 1e-12);
    sigma.diagonal().array() += ridge_scale * scale * std::pow(10.0, attempt);
    ridged = true;
  }
  fail(ErrorKind::numerical, "em_mvn: covariance not positive definite after ridge");
}

}  // namespace

double mvn_observed_loglik(const Eigen::MatrixXd& Y, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                           const Eigen::VectorXd* counts) {
  const auto patterns = group_patterns(Y, counts);
  double ll = 0;
  for (const auto& p : patterns) {
    const auto c = conditional(p, mu, sigma);
    if (!c.ok) fail(ErrorKind::numerical, "observed-block covariance not positive definite");
    ll += c.loglik;
  }
  return ll;
}

MvnFit em_mvn(const Eigen::MatrixXd& Y, const EmConfig& cfg, const Eigen::VectorXd* counts) {
  const Eigen::Index n = Y.rows(), d = Y.cols();
  if (!(cfg.tol > 0)) fail(ErrorKind::config, "em_tol must be positive");
  if (counts && counts->size() != n) fail(ErrorKind::invalid_input, "em_mvn: counts size mismatch");
  const auto patterns = group_patterns(Y, counts);
  double total = 0;
  for (const auto& p : patterns) total += p.n;
  if (!(total > static_cast<double>(d))) fail(ErrorKind::invalid_input, "em_mvn: need more rows than variables");

  MvnFit fit;
  fit.mu = Eigen::VectorXd::Zero(d);
  fit.sigma = Eigen::MatrixXd::Zero(d, d);
  // Start from observed means and variances.
  for (Eigen::Index k = 0; k < d; ++k) {
    double w = 0, s = 0, ss = 0;
    int distinct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double c = counts ? (*counts)[i] : 1.0;
      if (std::isnan(Y(i, k)) || c == 0) continue;
      ++distinct;
      w += c;
      s += c * Y(i, k);
      ss += c * Y(i, k) * Y(i, k);
    }
    if (distinct < 2) fail(ErrorKind::invalid_input, "em_mvn: variable " + std::to_string(k) + " has fewer than 2 observed values");
    fit.mu[k] = s / w;
    fit.sigma(k, k) = std::max(ss / w - fit.mu[k] * fit.mu[k], 1e-8);
  }

  bool ridged = false;
  for (int it = 0; it <= cfg.max_iter; ++it) {
    const auto conds = all_conditionals(patterns, fit.mu, fit.sigma, cfg.ridge_scale, ridged);
    double ll = 0;
    for (const auto& c : conds) ll += c.loglik;
    fit.loglik_trace.push_back(ll);
    const std::size_t t = fit.loglik_trace.size();
    if (t >= 2) {
      const double prev = fit.loglik_trace[t - 2];
      if (std::abs(ll - prev) <= cfg.tol * std::abs(prev)) {
        fit.converged = true;
        break;
      }
    }
    if (it == cfg.max_iter) break;

    Eigen::VectorXd T1 = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd T2 = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t k = 0; k < patterns.size(); ++k) {
      const auto& p = patterns[k];
      if (p.n == 0) continue;
      const auto& c = conds[k];
      const Eigen::VectorXd Bs = c.B * p.s;
      const Eigen::VectorXd t1m = p.n * c.c + Bs;
      const Eigen::MatrixXd t2mo = c.c * p.s.transpose() + c.B * p.S;
      const Eigen::MatrixXd t2mm = p.n * (c.c * c.c.transpose() + c.C) + c.c * Bs.transpose() + Bs * c.c.transpose() +
                                   c.B * p.S * c.B.transpose();
      for (std::size_t a = 0; a < p.obs.size(); ++a) {
        T1[p.obs[a]] += p.s[static_cast<Eigen::Index>(a)];
        for (std::size_t b = 0; b < p.obs.size(); ++b)
          T2(p.obs[a], p.obs[b]) += p.S(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
      for (std::size_t a = 0; a < p.mis.size(); ++a) {
        const auto ia = static_cast<Eigen::Index>(a);
        T1[p.mis[a]] += t1m[ia];
        for (std::size_t b = 0; b < p.obs.size(); ++b) {
          const double v = t2mo(ia, static_cast<Eigen::Index>(b));
          T2(p.mis[a], p.obs[b]) += v;
          T2(p.obs[b], p.mis[a]) += v;
        }
        for (std::size_t b = 0; b < p.mis.size(); ++b) T2(p.mis[a], p.mis[b]) += t2mm(ia, static_cast<Eigen::Index>(b));
      }
    }
    fit.mu = T1 / total;
    fit.sigma = T2 / total - fit.mu * fit.mu.transpose();
    fit.sigma = 0.5 * (fit.sigma + fit.sigma.transpose());
    fit.iterations = it + 1;
  }
  if (ridged) fit.flags.push_back("em_ridge");
  if (!fit.converged) fit.flags.push_back("em_not_converged");
  return fit;
}

JmConfig jm_config_from_json(const nlohmann::json& j) {
  JmConfig c;
  try {
    c.include_outcomes = j.value("include_outcomes", c.include_outcomes);
    c.one_hot_numeric_bins = j.value("one_hot_numeric_bins", c.one_hot_numeric_bins);
    c.m = j.value("m", c.m);
    c.seed = j.value("seed", c.seed);
    c.em.tol = j.value("em_tol", c.em.tol);
    c.em.max_iter = j.value("em_max_iter", c.em.max_iter);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("jm config: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const JmConfig& c) {
  return {{"include_outcomes", c.include_outcomes},
          {"one_hot_numeric_bins", c.one_hot_numeric_bins},
          {"m", c.m},
          {"em_tol", c.em.tol},
          {"em_max_iter", c.em.max_iter}};
}

std::vector<ImputedSet> run_jm_imputer(const Dataset& ds, const JmConfig& cfg) {
  if (cfg.m < 1) fail(ErrorKind::config, "m must be at least 1");
  const ImputationFrame frame = make_frame(ds, cfg.include_outcomes, cfg.one_hot_numeric_bins, true);
  const auto& cols = frame.model_columns;
  const Dataset& work = frame.work;
  const auto n = static_cast<Eigen::Index>(work.rows());
  const auto d = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd Y(n, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const auto& c = work.column(cols[static_cast<std::size_t>(k)]);
    if (c.spec.kind == Kind::categorical) fail(ErrorKind::invalid_input, "JM imputer: categorical column '" + c.spec.name + "' in model");
    for (Eigen::Index i = 0; i < n; ++i) Y(i, k) = c.values[static_cast<std::size_t>(i)];
  }
  std::vector<std::uint8_t> fuzzy(work.cols(), 0);
  for (std::size_t c : frame.incomplete)
    if (work.column(c).spec.kind == Kind::binary) fuzzy[c] = 1;

  const auto patterns = group_patterns(Y, nullptr);
  std::vector<ImputedSet> out(static_cast<std::size_t>(cfg.m));
  parallel_for(out.size(), cfg.threads, [&](std::size_t j) {
    ImputedSet set;
    set.index = static_cast<int>(j) + 1;
    std::vector<std::vector<double>> values;
    for (const auto& c : work.columns()) values.push_back(c.values);
    if (!frame.incomplete.empty()) {
      Rng rng(cfg.seed, {static_cast<std::uint64_t>(j + 1)});
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i) counts[static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)))] += 1.0;
      MvnFit fit = em_mvn(Y, cfg.em, &counts);
      set.flags = fit.flags;
      bool ridged = false;
      const auto conds = all_conditionals(patterns, fit.mu, fit.sigma, cfg.em.ridge_scale, ridged);
      if (ridged) set.flags.push_back("jm_draw_ridge");
      for (std::size_t k = 0; k < patterns.size(); ++k) {
        const auto& p = patterns[k];
        if (p.mis.empty()) continue;
        const auto& cd = conds[k];
        const auto q = static_cast<Eigen::Index>(p.mis.size());
        Eigen::MatrixXd C = 0.5 * (cd.C + cd.C.transpose());
        Eigen::LLT<Eigen::MatrixXd> llt(C);
        double r = cfg.em.ridge_scale * std::max(C.diagonal().mean(), 1e-12);
        while (llt.info() != Eigen::Success && r < 1e6) {
          Eigen::MatrixXd a = C;
          a.diagonal().array() += r;
          llt.compute(a);
          r *= 10;
          set.flags.push_back("jm_draw_ridge");
        }
        const Eigen::MatrixXd L = llt.matrixL();
        for (Eigen::Index i : p.rows) {
          Eigen::VectorXd xo(static_cast<Eigen::Index>(p.obs.size()));
          for (std::size_t a = 0; a < p.obs.size(); ++a) xo[static_cast<Eigen::Index>(a)] = Y(i, p.obs[a]);
          Eigen::VectorXd z(q);
          for (Eigen::Index a = 0; a < q; ++a) z[a] = rng.normal();
          const Eigen::VectorXd xm = cd.c + cd.B * xo + L * z;
          for (Eigen::Index a = 0; a < q; ++a)
            values[cols[static_cast<std::size_t>(p.mis[static_cast<std::size_t>(a)])]][static_cast<std::size_t>(i)] = xm[a];
        }
      }
    }
    set.dataset = assemble(frame, values, fuzzy);
    out[j] = std::move(set);
  });
  return out;
}

}  // namespace mieval
