#include "chained.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mieval/design.hpp"

namespace mieval::detail {

ChainResult run_chain(const ImputationFrame& frame, const ChainSettings& settings, const Univariate& draw, Rng& rng,
                      std::vector<std::string>& flags) {
  ChainResult result;
  const Dataset filled = initial_fill(frame.work);
  for (const auto& c : filled.columns()) result.values.push_back(c.values);
  if (frame.incomplete.empty()) return result;

  const auto terms = design_terms(filled, frame.model_columns);
  Eigen::MatrixXd M = design_matrix(filled, terms, true);

  // Visit order by missing count; ties keep column order.
  std::vector<std::size_t> order = frame.incomplete;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ma = frame.work.column(a).missing_count(), mb = frame.work.column(b).missing_count();
    return settings.order == VisitOrder::monotone ? ma < mb : ma > mb;
  });

  struct Target {
    std::size_t column;
    std::vector<Eigen::Index> keep;  // design columns used as predictors
    std::vector<Eigen::Index> own;   // design columns derived from the target
    std::vector<std::size_t> obs, mis;
    Eigen::VectorXd y_obs;
  };
  std::vector<Target> targets;
  for (std::size_t c : order) {
    Target t;
    t.column = c;
    t.keep.push_back(0);
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const auto idx = static_cast<Eigen::Index>(k + 1);
      if (terms[k].column == c) t.own.push_back(idx);
      else t.keep.push_back(idx);
    }
    t.obs = observed_rows(frame.work, c);
    t.mis = missing_rows(frame.work, c);
    t.y_obs.resize(static_cast<Eigen::Index>(t.obs.size()));
    const auto& vals = frame.work.column(c).values;
    for (std::size_t r = 0; r < t.obs.size(); ++r) t.y_obs[static_cast<Eigen::Index>(r)] = vals[t.obs[r]];
    if (t.obs.size() < 10 * t.keep.size()) flags.push_back("few_observed:" + frame.work.column(c).spec.name);
    targets.push_back(std::move(t));
  }

  auto gather = [&](const std::vector<std::size_t>& rows, const std::vector<Eigen::Index>& cols) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
      for (std::size_t r = 0; r < rows.size(); ++r) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = M(static_cast<Eigen::Index>(rows[r]), cols[k]);
    return X;
  };

  std::vector<double> previous;
  for (int sweep = 0; sweep < settings.max_iter; ++sweep) {
    std::vector<double> means;
    for (const auto& t : targets) {
      const Eigen::MatrixXd X_obs = gather(t.obs, t.keep);
      const Eigen::MatrixXd X_mis = gather(t.mis, t.keep);
      const Eigen::VectorXd imp = draw(t.column, t.y_obs, X_obs, X_mis, rng, flags);
      auto& col = result.values[t.column];
      for (std::size_t r = 0; r < t.mis.size(); ++r) col[t.mis[r]] = imp[static_cast<Eigen::Index>(r)];
      for (Eigen::Index idx : t.own) {
        const auto& term = terms[static_cast<std::size_t>(idx - 1)];
        for (std::size_t r : t.mis)
          M(static_cast<Eigen::Index>(r), idx) = term.level < 0 ? col[r] : (col[r] == term.level ? 1.0 : 0.0);
      }
      // Means of the imputed design values (one per derived column).
      for (Eigen::Index idx : t.own) {
        double s = 0;
        for (std::size_t r : t.mis) s += M(static_cast<Eigen::Index>(r), idx);
        means.push_back(s / static_cast<double>(t.mis.size()));
      }
    }
    result.mean_trace.push_back(means);
    result.sweeps = sweep + 1;
    if (!previous.empty()) {
      double change = 0;
      for (std::size_t k = 0; k < means.size(); ++k)
        change = std::max(change, std::abs(means[k] - previous[k]) / std::max(std::abs(previous[k]), 1e-8));
      if (change < settings.early_stop_tol) break;
    }
    previous = std::move(means);
  }
  return result;
}

}  // namespace mieval::detail
