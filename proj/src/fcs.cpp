#include "mieval/fcs.hpp"

#include "chained.hpp"
#include "mieval/error.hpp"
#include "mieval/parallel.hpp"

namespace mieval {

FcsVariant fcs_variant_from_string(const std::string& s) {
  if (s == "default") return FcsVariant::default_;
  if (s == "norm") return FcsVariant::norm;
  if (s == "logreg") return FcsVariant::logreg;
  fail(ErrorKind::config, "unknown FCS variant '" + s + "'");
}

std::string_view to_string(FcsVariant v) {
  switch (v) {
    case FcsVariant::default_: return "default";
    case FcsVariant::norm: return "norm";
    case FcsVariant::logreg: return "logreg";
  }
  return "?";
}

FcsConfig fcs_config_from_json(const nlohmann::json& j) {
  FcsConfig c;
  try {
    c.variant = fcs_variant_from_string(j.value("variant", std::string("default")));
    c.include_outcomes = j.value("include_outcomes", c.include_outcomes);
    c.one_hot_numeric_bins = j.value("one_hot_numeric_bins", c.one_hot_numeric_bins);
    c.one_hot_categorical = j.value("one_hot_categorical", c.one_hot_categorical);
    c.visit_order = visit_order_from_string(j.value("visit_order", std::string("monotone")));
    c.max_iter = j.value("max_iter", c.max_iter);
    c.pmm_donors = j.value("pmm_donors", c.pmm_donors);
    c.m = j.value("m", c.m);
    c.seed = j.value("seed", c.seed);
    c.early_stop_tol = j.value("early_stop_tol", c.early_stop_tol);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("fcs config: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const FcsConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"include_outcomes", c.include_outcomes},
          {"one_hot_numeric_bins", c.one_hot_numeric_bins},
          {"one_hot_categorical", c.one_hot_categorical},
          {"visit_order", to_string(c.visit_order)},
          {"max_iter", c.max_iter},
          {"pmm_donors", c.pmm_donors},
          {"m", c.m},
          {"early_stop_tol", c.early_stop_tol}};
}

std::vector<ImputedSet> run_fcs(const Dataset& ds, const FcsConfig& cfg) {
  if (cfg.m < 1) fail(ErrorKind::config, "m must be at least 1");
  if (cfg.max_iter < 1) fail(ErrorKind::config, "max_iter must be at least 1");
  if (cfg.variant == FcsVariant::default_ && cfg.pmm_donors < 1) fail(ErrorKind::config, "pmm_donors must be at least 1");
  if (cfg.variant == FcsVariant::logreg && !(cfg.one_hot_numeric_bins && cfg.one_hot_categorical))
    fail(ErrorKind::config, "the logreg variant imputes one-hot columns: enable both one-hot flags");

  const ImputationFrame frame = make_frame(ds, cfg.include_outcomes, cfg.one_hot_numeric_bins, cfg.one_hot_categorical);

  std::vector<std::uint8_t> fuzzy(frame.work.cols(), 0);
  if (cfg.variant == FcsVariant::norm)
    for (std::size_t c : frame.incomplete)
      if (frame.work.column(c).spec.kind == Kind::binary) fuzzy[c] = 1;

  const detail::Univariate draw = [&](std::size_t c, const Eigen::VectorXd& y_obs, const Eigen::MatrixXd& X_obs,
                                      const Eigen::MatrixXd& X_mis, Rng& rng, std::vector<std::string>& flags) {
    const auto& spec = frame.work.column(c).spec;
    switch (spec.kind) {
      case Kind::categorical:
        return impute_polyreg(y_obs, static_cast<int>(spec.categories.size()), X_obs, X_mis, rng, &flags);
      case Kind::binary:
        if (cfg.variant == FcsVariant::norm) return impute_norm(y_obs, X_obs, X_mis, rng);
        return impute_logreg(y_obs, X_obs, X_mis, rng, &flags);
      case Kind::numeric:
        if (cfg.variant == FcsVariant::norm) return impute_norm(y_obs, X_obs, X_mis, rng);
        return impute_pmm(y_obs, X_obs, X_mis, std::max(cfg.pmm_donors, 1), rng);
    }
    fail(ErrorKind::invalid_input, "unsupported column kind");
  };

  const detail::ChainSettings settings{cfg.visit_order, cfg.max_iter, cfg.early_stop_tol};
  std::vector<ImputedSet> out(static_cast<std::size_t>(cfg.m));
  parallel_for(out.size(), cfg.threads, [&](std::size_t j) {
    Rng rng(cfg.seed, {static_cast<std::uint64_t>(j + 1)});
    ImputedSet set;
    set.index = static_cast<int>(j) + 1;
    const auto chain = detail::run_chain(frame, settings, draw, rng, set.flags);
    set.dataset = assemble(frame, chain.values, fuzzy);
    out[j] = std::move(set);
  });
  return out;
}

}  // namespace mieval
