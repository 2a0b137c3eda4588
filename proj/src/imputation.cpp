#include "mieval/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include "mieval/error.hpp"
#include "mieval/estimators.hpp"
#include "mieval/stats.hpp"

namespace mieval {

VisitOrder visit_order_from_string(const std::string& s) {
  if (s == "monotone") return VisitOrder::monotone;
  if (s == "revmonotone") return VisitOrder::revmonotone;
  fail(ErrorKind::config, "unknown visit order '" + s + "'");
}

std::string_view to_string(VisitOrder order) { return order == VisitOrder::monotone ? "monotone" : "revmonotone"; }

namespace {

bool is_outcome_role(Role r) { return r == Role::outcome || r == Role::survival_time || r == Role::survival_event; }

bool logged(const ColumnSpec& s) { return s.kind == Kind::numeric && s.log_transform && s.indicator_of.empty(); }

Eigen::VectorXd standard_normals(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
  return z;
}

}  // namespace

ImputationFrame make_frame(const Dataset& ds, bool include_outcomes, bool one_hot_numeric_bins,
                           bool one_hot_categorical) {
  ImputationFrame f;
  f.source = encode_for_imputation(ds, one_hot_numeric_bins, one_hot_categorical);
  std::vector<Column> cols = f.source.columns();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    auto& c = cols[j];
    const bool in_model = c.spec.role == Role::predictor || (include_outcomes && is_outcome_role(c.spec.role));
    const std::size_t n_missing = c.missing_count();
    if (in_model) f.model_columns.push_back(j);
    if (n_missing > 0) {
      if (!in_model) fail(ErrorKind::invalid_input, "column '" + c.spec.name + "' has missing cells but is not imputed");
      if (n_missing == c.values.size()) fail(ErrorKind::invalid_input, "column '" + c.spec.name + "' is entirely missing");
      f.incomplete.push_back(j);
    }
    if (logged(c.spec)) {
      for (std::size_t i = 0; i < c.values.size(); ++i) {
        if (c.missing[i]) continue;
        if (!(c.values[i] > 0)) fail(ErrorKind::invalid_input, "log transform of non-positive value in '" + c.spec.name + "'");
        c.values[i] = std::log(c.values[i]);
      }
    }
  }
  f.work = Dataset(std::move(cols));
  return f;
}

Dataset assemble(const ImputationFrame& frame, const std::vector<std::vector<double>>& values,
                 const std::vector<std::uint8_t>& fuzzy) {
  std::vector<Column> cols = frame.source.columns();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    auto& c = cols[j];
    if (c.missing_count() == 0) continue;
    const bool log_scale = logged(c.spec);
    const bool is_fuzzy = !fuzzy.empty() && fuzzy[j];
    if (is_fuzzy && c.spec.kind == Kind::binary) {
      c.spec.kind = Kind::numeric;
      if (c.spec.indicator_of.empty()) c.spec.indicator_of = c.spec.name;
    }
    // A donor copied on the log scale maps back to the donor's own value;
    // exp(log(x)) is not always x.
    std::unordered_map<double, double> donor;
    if (log_scale)
      for (std::size_t i = 0; i < c.values.size(); ++i)
        if (!c.missing[i]) donor.emplace(std::log(c.values[i]), c.values[i]);
    for (std::size_t i = 0; i < c.values.size(); ++i) {
      if (!c.missing[i]) continue;
      const double v = values[j][i];
      if (log_scale) {
        const auto it = donor.find(v);
        c.values[i] = it != donor.end() ? it->second : std::exp(v);
      } else {
        c.values[i] = v;
      }
      c.missing[i] = 0;
    }
  }
  return Dataset(std::move(cols));
}

Dataset initial_fill(const Dataset& ds) {
  std::vector<Column> cols = ds.columns();
  for (auto& c : cols) {
    const std::size_t n_missing = c.missing_count();
    if (n_missing == 0) continue;
    if (n_missing == c.values.size()) fail(ErrorKind::invalid_input, "column '" + c.spec.name + "' is entirely missing");
    double fill = 0;
    if (c.spec.kind == Kind::numeric) {
      double s = 0;
      for (std::size_t i = 0; i < c.values.size(); ++i)
        if (!c.missing[i]) s += c.values[i];
      fill = s / static_cast<double>(c.values.size() - n_missing);
    } else {
      const std::size_t levels = c.spec.kind == Kind::binary ? 2 : c.spec.categories.size();
      std::vector<std::size_t> counts(levels, 0);
      for (std::size_t i = 0; i < c.values.size(); ++i)
        if (!c.missing[i]) ++counts[static_cast<std::size_t>(c.values[i])];
      fill = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }
    for (std::size_t i = 0; i < c.values.size(); ++i) {
      if (c.missing[i]) {
        c.values[i] = fill;
        c.missing[i] = 0;
      }
    }
  }
  return Dataset(std::move(cols));
}

double chi_square_draw(double df, Rng& rng) {
  std::gamma_distribution<double> g(0.5 * df, 2.0);
  return g(rng);
}

LinearFit fit_linear(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double ridge) {
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
  xtx.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
  xtx.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(xtx.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) {
    // Scale the ridge until the factorization succeeds.
    double r = std::max(ridge, 1e-8) * std::max(1.0, xtx.diagonal().mean());
    do {
      Eigen::MatrixXd a = xtx;
      a.diagonal().array() += r;
      llt.compute(a.selfadjointView<Eigen::Lower>());
      r *= 10;
    } while (llt.info() != Eigen::Success && r < 1e12);
    if (llt.info() != Eigen::Success) fail(ErrorKind::numerical, "linear fit: normal equations not solvable");
  }
  LinearFit fit;
  fit.beta = llt.solve(X.transpose() * y);
  fit.chol_lower = llt.matrixL();
  fit.rss = (y - X * fit.beta).squaredNorm();
  return fit;
}

namespace {

// (β*, σ*) draw from the approximate posterior of a linear model.
std::pair<Eigen::VectorXd, double> posterior_draw(const LinearFit& fit, Eigen::Index n_obs, Rng& rng) {
  const Eigen::Index p = fit.beta.size();
  const double df = std::max<double>(1.0, static_cast<double>(n_obs - p));
  const double sigma = std::sqrt(std::max(fit.rss, 1e-300) / chi_square_draw(df, rng));
  const Eigen::VectorXd z = standard_normals(p, rng);
  // L Lᵀ = XᵀX, so L⁻ᵀ z has covariance (XᵀX)⁻¹.
  const Eigen::VectorXd v = fit.chol_lower.transpose().triangularView<Eigen::Upper>().solve(z);
  return {fit.beta + sigma * v, sigma};
}

void check_design(const Eigen::VectorXd& y_obs, const Eigen::MatrixXd& X_obs, const Eigen::MatrixXd& X_mis) {
  if (y_obs.size() != X_obs.rows()) fail(ErrorKind::invalid_input, "imputation model: y and X sizes differ");
  if (X_obs.cols() != X_mis.cols()) fail(ErrorKind::invalid_input, "imputation model: column count differs");
  if (y_obs.size() == 0) fail(ErrorKind::invalid_input, "imputation model: no observed rows");
}

}  // namespace

Eigen::VectorXd impute_pmm(const Eigen::VectorXd& y_obs, const Eigen::MatrixXd& X_obs, const Eigen::MatrixXd& X_mis,
                           int k, Rng& rng) {
  check_design(y_obs, X_obs, X_mis);
  if (k < 1) fail(ErrorKind::invalid_input, "pmm: donors must be at least 1");
  const auto n_obs = y_obs.size();
  if (k > n_obs) fail(ErrorKind::invalid_input, "pmm: more donors requested than observed rows");
  const LinearFit fit = fit_linear(y_obs, X_obs);
  const auto [beta_star, sigma] = posterior_draw(fit, n_obs, rng);
  (void)sigma;
  const Eigen::VectorXd yhat_obs = X_obs * fit.beta;
  const Eigen::VectorXd yhat_mis = X_mis * beta_star;

  // Donors sorted by prediction; a random initial order breaks ties.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_obs));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return yhat_obs[a] < yhat_obs[b]; });
  std::vector<double> sorted(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = yhat_obs[order[i]];

  Eigen::VectorXd out(X_mis.rows());
  std::vector<std::size_t> window;
  for (Eigen::Index r = 0; r < X_mis.rows(); ++r) {
    const double target = yhat_mis[r];
    auto pos = static_cast<std::ptrdiff_t>(std::lower_bound(sorted.begin(), sorted.end(), target) - sorted.begin());
    std::ptrdiff_t lo = pos - 1, hi = pos;
    window.clear();
    while (static_cast<int>(window.size()) < k) {
      const bool take_lo =
          hi >= static_cast<std::ptrdiff_t>(sorted.size()) ||
          (lo >= 0 && target - sorted[static_cast<std::size_t>(lo)] <= sorted[static_cast<std::size_t>(hi)] - target);
      if (take_lo) window.push_back(static_cast<std::size_t>(lo--));
      else window.push_back(static_cast<std::size_t>(hi++));
    }
    const std::size_t pick = window[rng.below(window.size())];
    out[r] = y_obs[order[pick]];
  }
  return out;
}

Eigen::VectorXd impute_norm(const Eigen::VectorXd& y_obs, const Eigen::MatrixXd& X_obs, const Eigen::MatrixXd& X_mis,
                            Rng& rng) {
  check_design(y_obs, X_obs, X_mis);
  const LinearFit fit = fit_linear(y_obs, X_obs);
  const auto [beta_star, sigma] = posterior_draw(fit, y_obs.size(), rng);
  Eigen::VectorXd out = X_mis * beta_star;
  for (Eigen::Index r = 0; r < out.size(); ++r) out[r] += sigma * rng.normal();
  return out;
}

namespace {

bool looks_separated(const LogisticFit& fit, const Eigen::MatrixXd& X) {
  if (!fit.converged || !fit.beta.allFinite()) return true;
  for (Eigen::Index k = 1; k < X.cols(); ++k) {
    const double mean = X.col(k).mean();
    const double sd = std::sqrt((X.col(k).array() - mean).square().mean());
    if (std::abs(fit.beta[k]) * sd > 25.0) return true;
  }
  return false;
}

// Draw from Normal(beta, info⁻¹).
Eigen::VectorXd gaussian_draw(const Eigen::VectorXd& beta, const Eigen::MatrixXd& info, Rng& rng) {
  Eigen::MatrixXd a = info;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  double r = 1e-8 * std::max(1.0, a.diagonal().mean());
  while (llt.info() != Eigen::Success && r < 1e8) {
    a = info;
    a.diagonal().array() += r;
    llt.compute(a);
    r *= 10;
  }
  if (llt.info() != Eigen::Success) fail(ErrorKind::numerical, "posterior draw: information not positive definite");
  const Eigen::VectorXd z = standard_normals(beta.size(), rng);
  const Eigen::MatrixXd L = llt.matrixL();
  return beta + L.transpose().triangularView<Eigen::Upper>().solve(z);
}

}  // namespace

Eigen::VectorXd impute_logreg(const Eigen::VectorXd& y_obs, const Eigen::MatrixXd& X_obs, const Eigen::MatrixXd& X_mis,
                              Rng& rng, std::vector<std::string>* flags) {
  check_design(y_obs, X_obs, X_mis);
  const double ones = y_obs.sum();
  if (ones == 0 || ones == static_cast<double>(y_obs.size()))
    fail(ErrorKind::invalid_input, "logreg: only one class observed");
  FitOptions opts;
  opts.max_iter = 30;
  opts.tol = 1e-6;
  LogisticFit fit = logistic_irls(X_obs, y_obs, nullptr, 0.0, opts);
  if (looks_separated(fit, X_obs)) {
    opts.max_iter = 100;
    fit = logistic_irls(X_obs, y_obs, nullptr, 1e-4, opts);
    if (flags) flags->push_back("logreg_ridge");
  }
  const Eigen::VectorXd beta_star = gaussian_draw(fit.beta, fit.information, rng);
  const Eigen::VectorXd eta = X_mis * beta_star;
  Eigen::VectorXd out(X_mis.rows());
  for (Eigen::Index r = 0; r < out.size(); ++r) out[r] = rng.uniform() < stats::logistic(eta[r]) ? 1.0 : 0.0;
  return out;
}

namespace {

struct MultinomialFit {
  Eigen::MatrixXd beta;  // p x (K-1), columns for non-reference categories
  Eigen::MatrixXd information;
  bool converged = false;
};

// Probabilities over the K-1 non-reference categories for each row.
Eigen::MatrixXd softmax_rest(const Eigen::MatrixXd& X, const Eigen::MatrixXd& beta, double* loglik_rows = nullptr,
                             const std::vector<int>* y = nullptr) {
  Eigen::MatrixXd eta = X * beta;
  Eigen::MatrixXd prob(eta.rows(), eta.cols());
  double ll = 0;
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    const double mx = std::max(0.0, eta.row(i).maxCoeff());
    double denom = std::exp(-mx);
    for (Eigen::Index k = 0; k < eta.cols(); ++k) denom += std::exp(eta(i, k) - mx);
    for (Eigen::Index k = 0; k < eta.cols(); ++k) prob(i, k) = std::exp(eta(i, k) - mx) / denom;
    if (y) {
      const int c = (*y)[static_cast<std::size_t>(i)];
      ll += (c >= 0 ? eta(i, c) : 0.0) - mx - std::log(denom);
    }
  }
  if (loglik_rows) *loglik_rows = ll;
  return prob;
}

MultinomialFit fit_multinomial(const Eigen::MatrixXd& X, const std::vector<int>& y, int km1, double penalty) {
  const Eigen::Index n = X.rows(), p = X.cols();
  const Eigen::Index q = p * km1;
  MultinomialFit fit;
  fit.beta = Eigen::MatrixXd::Zero(p, km1);
  auto objective = [&](const Eigen::MatrixXd& b) {
    double ll = 0;
    softmax_rest(X, b, &ll, &y);
    return ll - 0.5 * penalty * b.bottomRows(p - 1).squaredNorm();
  };
  double current = objective(fit.beta);
  for (int it = 0; it < 50; ++it) {
    const Eigen::MatrixXd prob = softmax_rest(X, fit.beta);
    Eigen::VectorXd grad(q);
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(q, q);
    for (int k = 0; k < km1; ++k) {
      Eigen::VectorXd resid(n);
      for (Eigen::Index i = 0; i < n; ++i) resid[i] = (y[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0) - prob(i, k);
      grad.segment(k * p, p) = X.transpose() * resid;
      for (int l = k; l < km1; ++l) {
        Eigen::VectorXd w(n);
        for (Eigen::Index i = 0; i < n; ++i) w[i] = prob(i, k) * ((k == l ? 1.0 : 0.0) - prob(i, l));
        const Eigen::MatrixXd block = X.transpose() * (X.array().colwise() * w.array()).matrix();
        info.block(k * p, l * p, p, p) = block;
        if (l != k) info.block(l * p, k * p, p, p) = block.transpose();
      }
    }
    if (penalty > 0) {
      for (int k = 0; k < km1; ++k) {
        grad.segment(k * p + 1, p - 1) -= penalty * fit.beta.col(k).tail(p - 1);
        info.diagonal().segment(k * p + 1, p - 1).array() += penalty;
      }
    }
    fit.information = info;
    if (grad.lpNorm<Eigen::Infinity>() < 1e-6) {
      fit.converged = true;
      break;
    }
    Eigen::MatrixXd a = info;
    a.diagonal().array() += 1e-8;
    const Eigen::VectorXd step = a.ldlt().solve(grad);
    double scale = 1.0;
    bool improved = false;
    for (int h = 0; h < 30; ++h) {
      Eigen::MatrixXd cand = fit.beta;
      for (int k = 0; k < km1; ++k) cand.col(k) += scale * step.segment(k * p, p);
      const double val = objective(cand);
      if (std::isfinite(val) && val >= current - 1e-12) {
        fit.beta = cand;
        current = val;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
  }
  return fit;
}

}  // namespace

Eigen::VectorXd impute_polyreg(const Eigen::VectorXd& y_obs, int n_categories, const Eigen::MatrixXd& X_obs,
                               const Eigen::MatrixXd& X_mis, Rng& rng, std::vector<std::string>* flags) {
  check_design(y_obs, X_obs, X_mis);
  if (n_categories < 2) fail(ErrorKind::invalid_input, "polyreg: fewer than 2 categories");
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_categories), 0);
  for (Eigen::Index i = 0; i < y_obs.size(); ++i) ++counts[static_cast<std::size_t>(y_obs[i])];
  std::vector<int> present;
  for (int c = 0; c < n_categories; ++c)
    if (counts[static_cast<std::size_t>(c)] > 0) present.push_back(c);
  if (present.size() < 2) fail(ErrorKind::invalid_input, "polyreg: fewer than 2 categories observed");
  // Reference = largest observed category; unobserved categories are never imputed.
  const int ref = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  std::vector<int> rest;
  for (int c : present)
    if (c != ref) rest.push_back(c);
  const int km1 = static_cast<int>(rest.size());
  std::vector<int> code(static_cast<std::size_t>(n_categories), -1);
  for (int k = 0; k < km1; ++k) code[static_cast<std::size_t>(rest[static_cast<std::size_t>(k)])] = k;
  std::vector<int> y(static_cast<std::size_t>(y_obs.size()));
  for (Eigen::Index i = 0; i < y_obs.size(); ++i) y[static_cast<std::size_t>(i)] = code[static_cast<std::size_t>(y_obs[i])];

  MultinomialFit fit = fit_multinomial(X_obs, y, km1, 0.0);
  bool separated = !fit.converged || !fit.beta.allFinite();
  if (!separated) {
    for (Eigen::Index j = 1; j < X_obs.cols() && !separated; ++j) {
      const double mean = X_obs.col(j).mean();
      const double sd = std::sqrt((X_obs.col(j).array() - mean).square().mean());
      separated = fit.beta.row(j).cwiseAbs().maxCoeff() * sd > 25.0;
    }
  }
  if (separated) {
    fit = fit_multinomial(X_obs, y, km1, 1e-4);
    if (flags) flags->push_back("polyreg_ridge");
  }
  const Eigen::Index p = X_obs.cols();
  Eigen::VectorXd flat(p * km1);
  for (int k = 0; k < km1; ++k) flat.segment(k * p, p) = fit.beta.col(k);
  const Eigen::VectorXd draw = gaussian_draw(flat, fit.information, rng);
  Eigen::MatrixXd beta_star(p, km1);
  for (int k = 0; k < km1; ++k) beta_star.col(k) = draw.segment(k * p, p);
  const Eigen::MatrixXd prob = softmax_rest(X_mis, beta_star);
  Eigen::VectorXd out(X_mis.rows());
  for (Eigen::Index r = 0; r < out.size(); ++r) {
    double u = rng.uniform();
    int chosen = ref;
    for (int k = 0; k < km1; ++k) {
      if (u < prob(r, k)) {
        chosen = rest[static_cast<std::size_t>(k)];
        break;
      }
      u -= prob(r, k);
    }
    out[r] = chosen;
  }
  return out;
}

}  // namespace mieval
