#include "mieval/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mieval/error.hpp"
#include "mieval/stats.hpp"

namespace mieval {

Interval wald_ci(double q, double se, std::optional<double> df, double level) {
  const double p = 0.5 + level / 2.0;
  const double z = (df && std::isfinite(*df)) ? stats::t_quantile(p, *df) : stats::normal_quantile(p);
  return {q - z * se, q + z * se};
}

nlohmann::json to_json(const EstimateVector& e) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    rows.push_back({{"predictor", e.names[i]}, {"q", e.q[k]}, {"var", e.var[k]}, {"se", e.se[k]},
                    {"lower", e.lower[k]}, {"upper", e.upper[k]}});
  }
  return {{"estimates", rows}, {"n_used", e.n_used}, {"weights_applied", e.weights_applied},
          {"iterations", e.iterations}, {"flags", e.flags}};
}

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, double ridge) {
  Eigen::MatrixXd A = H;
  A.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) return ldlt.solve(g);
  return A.colPivHouseholderQr().solve(g);
}

// Inverse of an information matrix; ridge only when it is numerically singular.
Eigen::MatrixXd invert_information(const Eigen::MatrixXd& H, double ridge, bool* ridged) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  const auto d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() || d.minCoeff() <= 1e-12 * std::max(dmax, 1.0);
  if (ridged) *ridged = singular;
  const auto n = H.rows();
  if (!singular) return ldlt.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd A = H;
  A.diagonal().array() += ridge;
  return A.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
}

std::vector<std::string> collinear_columns(const Eigen::MatrixXd& X, const std::vector<std::string>& names, int offset) {
  std::vector<std::string> out;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  if (rank == X.cols()) return out;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = rank; k < X.cols(); ++k) {
    const int col = perm[k] - offset;
    out.push_back(col >= 0 ? names[static_cast<std::size_t>(col)] : std::string("(intercept)"));
  }
  return out;
}

bool is_binary_column(const Eigen::Ref<const Eigen::VectorXd>& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] != 0.0 && x[i] != 1.0) return false;
  return true;
}

void fill_interval(EstimateVector& e, double level) {
  const auto p = e.q.size();
  e.se = e.var.unaryExpr([](double v) { return std::isnan(v) ? v : std::sqrt(std::max(v, 0.0)); });
  e.lower.resize(p);
  e.upper.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const auto ci = wald_ci(e.q[k], e.se[k], std::nullopt, level);
    e.lower[k] = ci.lower;
    e.upper[k] = ci.upper;
  }
}

}  // namespace

double logistic_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd* weights,
                       const Eigen::VectorXd& beta, Eigen::VectorXd* score) {
  const Eigen::VectorXd eta = X * beta;
  double ll = 0.0;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double w = weights ? (*weights)[i] : 1.0;
    ll += w * (y[i] * eta[i] - softplus(eta[i]));
    resid[i] = w * (y[i] - stats::logistic(eta[i]));
  }
  if (score) *score = X.transpose() * resid;
  return ll;
}

LogisticFit logistic_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd* weights,
                          double penalty, const FitOptions& opts) {
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::VectorXd pen = Eigen::VectorXd::Constant(p, penalty);
  if (p > 0) pen[0] = 0.0;

  auto objective = [&](const Eigen::VectorXd& b) {
    return logistic_loglik(X, y, weights, b) - 0.5 * (pen.array() * b.array().square()).sum();
  };

  LogisticFit fit;
  fit.beta = Eigen::VectorXd::Zero(p);
  double current = objective(fit.beta);
  Eigen::VectorXd prob(n), wvec(n), resid(n);
  for (int it = 0; it <= opts.max_iter; ++it) {
    const Eigen::VectorXd eta = X * fit.beta;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = weights ? (*weights)[i] : 1.0;
      prob[i] = stats::logistic(eta[i]);
      wvec[i] = std::sqrt(w * prob[i] * (1.0 - prob[i]));
      resid[i] = w * (y[i] - prob[i]);
    }
    Eigen::VectorXd grad = X.transpose() * resid - (pen.array() * fit.beta.array()).matrix();
    const Eigen::MatrixXd Xw = X.array().colwise() * wvec.array();
    fit.information = Eigen::MatrixXd::Zero(p, p);
    fit.information.selfadjointView<Eigen::Lower>().rankUpdate(Xw.transpose());
    fit.information.triangularView<Eigen::StrictlyUpper>() = fit.information.transpose();
    fit.information.diagonal() += pen;
    fit.iterations = it;
    fit.loglik = current;
    if (grad.size() == 0 || grad.cwiseAbs().maxCoeff() < opts.tol) {
      fit.converged = true;
      break;
    }
    if (it == opts.max_iter) break;
    const Eigen::VectorXd step = solve_spd(fit.information, grad, opts.ridge);
    double scale = 1.0;
    Eigen::VectorXd next = fit.beta + step;
    double value = objective(next);
    for (int h = 0; h < 40 && !(value >= current - 1e-12 * std::abs(current)); ++h) {
      scale *= 0.5;
      next = fit.beta + scale * step;
      value = objective(next);
    }
    if (!std::isfinite(value)) break;
    fit.beta = next;
    current = value;
  }
  return fit;
}

LogisticResult fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<std::string>& names,
                            const Eigen::VectorXd* weights, const FitOptions& opts) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (static_cast<Eigen::Index>(names.size()) != p) fail(ErrorKind::invalid_input, "fit_logistic: names/columns mismatch");
  if (y.size() != n) fail(ErrorKind::invalid_input, "fit_logistic: outcome length mismatch");
  if (weights && weights->size() != n) fail(ErrorKind::invalid_input, "fit_logistic: weight length mismatch");

  double w1 = 0, w0 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights ? (*weights)[i] : 1.0;
    if (!(w >= 0) || !std::isfinite(w)) fail(ErrorKind::invalid_input, "fit_logistic: weights must be finite and nonnegative");
    if (y[i] != 0.0 && y[i] != 1.0) fail(ErrorKind::invalid_input, "fit_logistic: outcome must be binary");
    (y[i] == 1.0 ? w1 : w0) += w;
  }
  if (w1 == 0 || w0 == 0) fail(ErrorKind::infeasible, "fit_logistic: both outcome classes must be present");

  // Dummy columns: an empty level or a level with a single outcome class
  // drives its coefficient to infinity.
  std::vector<std::string> separated;
  for (Eigen::Index k = 0; k < p; ++k) {
    if (!is_binary_column(X.col(k))) continue;
    double n1[2] = {0, 0}, n0[2] = {0, 0};
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = weights ? (*weights)[i] : 1.0;
      if (w <= 0) continue;
      (X(i, k) == 1.0 ? n1 : n0)[static_cast<int>(y[i])] += 1;
    }
    if (n1[0] + n1[1] == 0 || n0[0] + n0[1] == 0 || n1[0] == 0 || n1[1] == 0 || n0[0] == 0 || n0[1] == 0)
      separated.push_back(names[static_cast<std::size_t>(k)]);
  }
  auto separation_error = [](const std::vector<std::string>& cols) {
    std::string msg = "fit_logistic: separation in columns";
    for (const auto& c : cols) msg += " '" + c + "'";
    fail(ErrorKind::numerical, msg);
  };
  if (!separated.empty()) separation_error(separated);

  Eigen::MatrixXd Xi(n, p + 1);
  Xi.col(0).setOnes();
  Xi.rightCols(p) = X;
  LogisticFit fit = logistic_irls(Xi, y, weights, 0.0, opts);
  if (!fit.converged) fail(ErrorKind::convergence, "fit_logistic: IRLS did not converge in " + std::to_string(opts.max_iter) + " iterations");

  for (Eigen::Index k = 0; k < p; ++k) {
    const auto col = X.col(k);
    const double mean = col.mean();
    const double sd = is_binary_column(col) ? 1.0 : std::sqrt((col.array() - mean).square().mean());
    if (std::abs(fit.beta[k + 1]) * sd > 25.0) separated.push_back(names[static_cast<std::size_t>(k)]);
  }
  if (!separated.empty()) separation_error(separated);

  LogisticResult out;
  auto& e = out.estimates;
  e.names = names;
  e.n_used = static_cast<std::size_t>(n);
  e.iterations = fit.iterations;
  for (const auto& c : collinear_columns(Xi, names, 1)) e.flags.push_back("collinear:" + c);

  bool ridged = false;
  Eigen::MatrixXd cov = invert_information(fit.information, opts.ridge, &ridged);
  if (ridged) e.flags.push_back("ridge");
  out.fitted = (Xi * fit.beta).unaryExpr([](double v) { return stats::logistic(v); });
  if (weights) {
    e.weights_applied = true;
    const Eigen::VectorXd r = (weights->array() * (y - out.fitted).array()).matrix();
    const Eigen::MatrixXd Xr = Xi.array().colwise() * r.array();
    const Eigen::MatrixXd meat = Xr.transpose() * Xr;
    cov = cov * meat * cov;
  }
  e.q = fit.beta.tail(p);
  e.var = cov.diagonal().tail(p);
  fill_interval(e, opts.level);
  out.intercept = fit.beta[0];
  out.intercept_se = std::sqrt(std::max(cov(0, 0), 0.0));
  return out;
}

// --- Cox ---------------------------------------------------------------------

namespace {

std::vector<Eigen::Index> order_by_time_desc(const Eigen::VectorXd& time) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(time.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return time[a] > time[b]; });
  return order;
}

}  // namespace

CoxValue cox_breslow(const Eigen::MatrixXd& X, const Eigen::VectorXd& time, const Eigen::VectorXd& event,
                     const Eigen::VectorXd* weights, const Eigen::VectorXd& beta) {
  const Eigen::Index n = X.rows(), p = X.cols();
  const Eigen::VectorXd eta = X * beta;
  const double shift = n > 0 ? eta.maxCoeff() : 0.0;
  const auto order = order_by_time_desc(time);

  CoxValue v;
  v.score = Eigen::VectorXd::Zero(p);
  v.information = Eigen::MatrixXd::Zero(p, p);
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

  std::size_t k = 0;
  while (k < order.size()) {
    const double t = time[order[k]];
    std::size_t end = k;
    while (end < order.size() && time[order[end]] == t) ++end;
    // Everyone with time t joins the risk set before the events at t.
    double dw = 0.0;
    Eigen::VectorXd event_x = Eigen::VectorXd::Zero(p);
    double event_eta = 0.0;
    for (std::size_t g = k; g < end; ++g) {
      const Eigen::Index i = order[g];
      const double w = weights ? (*weights)[i] : 1.0;
      const double r = w * std::exp(eta[i] - shift);
      s0 += r;
      s1.noalias() += r * X.row(i).transpose();
      s2.selfadjointView<Eigen::Lower>().rankUpdate(X.row(i).transpose(), r);
      if (event[i] != 0.0) {
        dw += w;
        event_x.noalias() += w * X.row(i).transpose();
        event_eta += w * (eta[i] - shift);
      }
    }
    if (dw > 0.0) {
      const Eigen::VectorXd xbar = s1 / s0;
      v.loglik += event_eta - dw * std::log(s0);
      v.score += event_x - dw * xbar;
      Eigen::MatrixXd s2full = s2.selfadjointView<Eigen::Lower>();
      v.information += dw * (s2full / s0 - xbar * xbar.transpose());
    }
    k = end;
  }
  return v;
}

EstimateVector fit_cox(const Eigen::MatrixXd& X, const Eigen::VectorXd& time, const Eigen::VectorXd& event,
                       const std::vector<std::string>& names, const Eigen::VectorXd* weights, const FitOptions& opts) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (static_cast<Eigen::Index>(names.size()) != p) fail(ErrorKind::invalid_input, "fit_cox: names/columns mismatch");
  if (time.size() != n || event.size() != n) fail(ErrorKind::invalid_input, "fit_cox: time/event length mismatch");
  double events = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(time[i] > 0) || !std::isfinite(time[i])) fail(ErrorKind::invalid_input, "fit_cox: times must be positive");
    if (event[i] != 0.0 && event[i] != 1.0) fail(ErrorKind::invalid_input, "fit_cox: event must be binary");
    if (weights && (!((*weights)[i] >= 0) || !std::isfinite((*weights)[i])))
      fail(ErrorKind::invalid_input, "fit_cox: weights must be finite and nonnegative");
    if (event[i] == 1.0 && (!weights || (*weights)[i] > 0)) events += 1;
  }
  if (events == 0) fail(ErrorKind::infeasible, "fit_cox: at least one event is required");

  EstimateVector e;
  e.names = names;
  e.n_used = static_cast<std::size_t>(n);
  e.q = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  e.var = e.q;

  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < p; ++k) {
    bool all_const = true, event_const = true;
    double first_all = X(0, k), first_event = std::numeric_limits<double>::quiet_NaN();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (X(i, k) != first_all) all_const = false;
      if (event[i] == 1.0) {
        if (std::isnan(first_event)) first_event = X(i, k);
        else if (X(i, k) != first_event) event_const = false;
      }
    }
    if (all_const || event_const) e.flags.push_back("non_identifiable:" + names[static_cast<std::size_t>(k)]);
    else keep.push_back(k);
  }
  const auto q = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd Xk(n, q);
  for (Eigen::Index c = 0; c < q; ++c) Xk.col(c) = X.col(keep[static_cast<std::size_t>(c)]);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  CoxValue cur = cox_breslow(Xk, time, event, weights, beta);
  bool converged = false;
  int it = 0;
  for (; it <= opts.max_iter; ++it) {
    if (q == 0 || cur.score.cwiseAbs().maxCoeff() < opts.tol) {
      converged = true;
      break;
    }
    if (it == opts.max_iter) break;
    const Eigen::VectorXd step = solve_spd(cur.information, cur.score, opts.ridge);
    double scale = 1.0;
    Eigen::VectorXd next = beta + step;
    CoxValue cand = cox_breslow(Xk, time, event, weights, next);
    for (int h = 0; h < 40 && !(cand.loglik >= cur.loglik - 1e-12 * std::abs(cur.loglik)); ++h) {
      scale *= 0.5;
      next = beta + scale * step;
      cand = cox_breslow(Xk, time, event, weights, next);
    }
    if (!std::isfinite(cand.loglik)) break;
    // Round-off floor: the step no longer moves beta.
    const bool stalled = (next - beta).cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + beta.cwiseAbs().maxCoeff());
    beta = next;
    cur = std::move(cand);
    if (stalled) {
      converged = true;
      e.flags.push_back("roundoff_floor");
      break;
    }
  }
  if (!converged) fail(ErrorKind::convergence, "fit_cox: Newton-Raphson did not converge in " + std::to_string(opts.max_iter) + " iterations");
  e.iterations = it;

  for (const auto& c : collinear_columns(Xk, [&] {
         std::vector<std::string> kn;
         for (auto k : keep) kn.push_back(names[static_cast<std::size_t>(k)]);
         return kn;
       }(), 0))
    e.flags.push_back("collinear:" + c);

  bool ridged = false;
  Eigen::MatrixXd cov = invert_information(cur.information, opts.ridge, &ridged);
  if (ridged) e.flags.push_back("ridge");

  if (weights && q > 0) {
    // Lin-Wei robust variance from score residuals.
    e.weights_applied = true;
    const Eigen::VectorXd eta = Xk * beta;
    const double shift = eta.maxCoeff();
    std::vector<Eigen::Index> asc = order_by_time_desc(time);
    std::reverse(asc.begin(), asc.end());
    // Risk-set sums S0/S1 at each distinct event time, built descending.
    const auto desc = order_by_time_desc(time);
    std::vector<double> s0_at(static_cast<std::size_t>(n));
    std::vector<Eigen::VectorXd> xbar_at(static_cast<std::size_t>(n));
    {
      double s0 = 0;
      Eigen::VectorXd s1 = Eigen::VectorXd::Zero(q);
      std::size_t k = 0;
      while (k < desc.size()) {
        const double t = time[desc[k]];
        std::size_t end = k;
        while (end < desc.size() && time[desc[end]] == t) ++end;
        for (std::size_t g = k; g < end; ++g) {
          const auto i = desc[g];
          const double r = (*weights)[i] * std::exp(eta[i] - shift);
          s0 += r;
          s1.noalias() += r * Xk.row(i).transpose();
        }
        for (std::size_t g = k; g < end; ++g) {
          s0_at[static_cast<std::size_t>(desc[g])] = s0;
          xbar_at[static_cast<std::size_t>(desc[g])] = s1 / s0;
        }
        k = end;
      }
    }
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(q, q);
    double hazard = 0;                               // Σ_{event k, t_k ≤ t} w_k / S0_k
    Eigen::VectorXd hazard_x = Eigen::VectorXd::Zero(q);  // Σ w_k x̄_k / S0_k
    std::size_t k = 0;
    while (k < asc.size()) {
      const double t = time[asc[k]];
      std::size_t end = k;
      while (end < asc.size() && time[asc[end]] == t) ++end;
      for (std::size_t g = k; g < end; ++g) {
        const auto i = asc[g];
        if (event[i] == 1.0) {
          const auto ui = static_cast<std::size_t>(i);
          hazard += (*weights)[i] / s0_at[ui];
          hazard_x += (*weights)[i] * xbar_at[ui] / s0_at[ui];
        }
      }
      for (std::size_t g = k; g < end; ++g) {
        const auto i = asc[g];
        const auto ui = static_cast<std::size_t>(i);
        const double r = std::exp(eta[i] - shift);
        Eigen::VectorXd u = -r * (Xk.row(i).transpose() * hazard - hazard_x);
        if (event[i] == 1.0) u += Xk.row(i).transpose() - xbar_at[ui];
        const double w = (*weights)[i];
        meat.selfadjointView<Eigen::Lower>().rankUpdate(u, w * w);
      }
      k = end;
    }
    meat.triangularView<Eigen::StrictlyUpper>() = meat.transpose();
    cov = cov * meat * cov;
  }

  for (Eigen::Index c = 0; c < q; ++c) {
    const auto k = keep[static_cast<std::size_t>(c)];
    e.q[k] = beta[c];
    e.var[k] = cov(c, c);
  }
  fill_interval(e, opts.level);
  return e;
}

}  // namespace mieval
