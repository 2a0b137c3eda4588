#include "mieval/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "chained.hpp"
#include "mieval/error.hpp"
#include "mieval/parallel.hpp"

namespace mieval {

namespace {

// Features coded into at most max_bins ordered groups of distinct values.
struct BinnedFeatures {
  Eigen::Index n = 0, p = 0;
  std::vector<std::uint8_t> codes;               // column-major n x p
  std::vector<std::vector<double>> thresholds;  // split after group g: x <= thresholds[f][g]
  std::vector<int> groups;
};

BinnedFeatures bin_features(const Eigen::MatrixXd& X, int max_bins) {
  BinnedFeatures b;
  b.n = X.rows();
  b.p = X.cols();
  b.codes.resize(static_cast<std::size_t>(b.n * b.p));
  b.thresholds.resize(static_cast<std::size_t>(b.p));
  b.groups.resize(static_cast<std::size_t>(b.p));
  const int cap = std::clamp(max_bins, 2, 255);
  std::vector<double> u;
  for (Eigen::Index f = 0; f < b.p; ++f) {
    u.assign(X.col(f).data(), X.col(f).data() + b.n);
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    const auto U = static_cast<std::ptrdiff_t>(u.size());
    const std::ptrdiff_t G = std::min<std::ptrdiff_t>(U, cap);
    std::vector<double> group_max(static_cast<std::size_t>(G));
    auto& thr = b.thresholds[static_cast<std::size_t>(f)];
    thr.assign(static_cast<std::size_t>(std::max<std::ptrdiff_t>(G - 1, 0)), 0.0);
    for (std::ptrdiff_t g = 0; g < G; ++g) {
      const std::ptrdiff_t end = (g + 1) * U / G;
      group_max[static_cast<std::size_t>(g)] = u[static_cast<std::size_t>(end - 1)];
      if (g + 1 < G) thr[static_cast<std::size_t>(g)] = 0.5 * (u[static_cast<std::size_t>(end - 1)] + u[static_cast<std::size_t>(end)]);
    }
    b.groups[static_cast<std::size_t>(f)] = static_cast<int>(G);
    std::uint8_t* col = b.codes.data() + f * b.n;
    for (Eigen::Index i = 0; i < b.n; ++i)
      col[i] = static_cast<std::uint8_t>(std::lower_bound(group_max.begin(), group_max.end(), X(i, f)) - group_max.begin());
  }
  return b;
}

struct Builder {
  const BinnedFeatures& bf;
  const Eigen::VectorXd& y;
  ForestKind kind;
  int K;
  int mtry;
  int min_leaf;
  Rng& rng;
  const std::vector<double>& weight;  // bootstrap multiplicity per row
  std::vector<int> features;
  std::vector<double> hist;  // groups x (2 or K)

  // Score of a node partition element: Σ²/n (regression) or Σ n_c²/n (Gini).
  void build(Forest::Tree& tree, std::vector<std::uint32_t>& rows) {
    struct Item {
      int node;
      std::size_t begin, end;
    };
    std::vector<Item> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, 0, rows.size()});
    const int width = kind == ForestKind::regression ? 2 : K;
    std::vector<double> total(static_cast<std::size_t>(width)), left(static_cast<std::size_t>(width));
    while (!stack.empty()) {
      const Item it = stack.back();
      stack.pop_back();
      std::fill(total.begin(), total.end(), 0.0);
      double sum_sq = 0;
      for (std::size_t r = it.begin; r < it.end; ++r) {
        const double w = weight[rows[r]];
        accumulate(total.data(), rows[r], w);
        if (kind == ForestKind::regression) sum_sq += w * y[rows[r]] * y[rows[r]];
      }
      // Sizes count bootstrap draws, so min_leaf means the same as with duplicated rows.
      const double size = kind == ForestKind::regression ? total[0] : std::accumulate(total.begin(), total.end(), 0.0);
      bool pure = false;
      if (kind == ForestKind::regression) {
        const double ss = sum_sq - total[1] * total[1] / size;
        pure = ss <= 1e-12 * std::max(1.0, sum_sq);
      } else {
        pure = std::count_if(total.begin(), total.end(), [](double c) { return c > 0; }) <= 1;
      }
      int best_f = -1, best_g = -1;
      if (!pure && size >= 2.0 * min_leaf) {
        const double parent = score(total.data(), size);
        double best = parent + 1e-12 * std::max(1.0, std::abs(parent));
        // mtry candidate features by partial shuffle.
        const int p = static_cast<int>(features.size());
        for (int k = 0; k < mtry && k < p; ++k) {
          const int swap = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(p - k)));
          std::swap(features[static_cast<std::size_t>(k)], features[static_cast<std::size_t>(swap)]);
          const int f = features[static_cast<std::size_t>(k)];
          const int G = bf.groups[static_cast<std::size_t>(f)];
          if (G < 2) continue;
          hist.assign(static_cast<std::size_t>(G * width), 0.0);
          const std::uint8_t* codes = bf.codes.data() + static_cast<std::ptrdiff_t>(f) * bf.n;
          for (std::size_t r = it.begin; r < it.end; ++r) accumulate(&hist[static_cast<std::size_t>(codes[rows[r]] * width)], rows[r], weight[rows[r]]);
          std::fill(left.begin(), left.end(), 0.0);
          double n_left = 0;
          for (int g = 0; g + 1 < G; ++g) {
            const double* h = &hist[static_cast<std::size_t>(g * width)];
            double n_g = kind == ForestKind::regression ? h[0] : std::accumulate(h, h + width, 0.0);
            if (n_g == 0) continue;
            for (int c = 0; c < width; ++c) left[static_cast<std::size_t>(c)] += h[c];
            n_left += n_g;
            const double n_right = size - n_left;
            if (n_left < min_leaf) continue;
            if (n_right < min_leaf) break;
            double s = score(left.data(), n_left);
            if (kind == ForestKind::regression) {
              const double rs = total[1] - left[1];
              s += rs * rs / n_right;
            } else {
              double q = 0;
              for (int c = 0; c < width; ++c) {
                const double v = total[static_cast<std::size_t>(c)] - left[static_cast<std::size_t>(c)];
                q += v * v;
              }
              s += q / n_right;
            }
            if (s > best) {
              best = s;
              best_f = f;
              best_g = g;
            }
          }
        }
      }
      if (best_f < 0) {
        Forest::Node& node = tree.nodes[static_cast<std::size_t>(it.node)];
        node.feature = -1;
        node.value = static_cast<int>(tree.values.size());
        if (kind == ForestKind::regression) {
          tree.values.push_back(total[1] / size);
        } else {
          for (int c = 0; c < K; ++c) tree.values.push_back(total[static_cast<std::size_t>(c)] / size);
        }
        continue;
      }
      const std::uint8_t* codes = bf.codes.data() + static_cast<std::ptrdiff_t>(best_f) * bf.n;
      const auto mid = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(it.begin), rows.begin() + static_cast<std::ptrdiff_t>(it.end),
                                      [&](std::uint32_t r) { return codes[r] <= best_g; });
      const auto split = static_cast<std::size_t>(mid - rows.begin());
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      Forest::Node& node = tree.nodes[static_cast<std::size_t>(it.node)];
      node.feature = best_f;
      node.threshold = bf.thresholds[static_cast<std::size_t>(best_f)][static_cast<std::size_t>(best_g)];
      node.left = l;
      node.right = l + 1;
      stack.push_back({l + 1, split, it.end});
      stack.push_back({l, it.begin, split});
    }
  }

  void accumulate(double* h, std::uint32_t row, double w) const {
    if (kind == ForestKind::regression) {
      h[0] += w;
      h[1] += w * y[row];
    } else {
      h[static_cast<int>(y[row])] += w;
    }
  }

  double score(const double* h, double n) const {
    if (kind == ForestKind::regression) return h[1] * h[1] / n;
    double q = 0;
    for (int c = 0; c < K; ++c) q += h[c] * h[c];
    return q / n;
  }
};

}  // namespace

const double* Forest::leaf(const Tree& tree, const Eigen::MatrixXd& X, Eigen::Index row) const {
  int k = 0;
  while (tree.nodes[static_cast<std::size_t>(k)].feature >= 0) {
    const Node& node = tree.nodes[static_cast<std::size_t>(k)];
    k = X(row, node.feature) <= node.threshold ? node.left : node.right;
  }
  return &tree.values[static_cast<std::size_t>(tree.nodes[static_cast<std::size_t>(k)].value)];
}

double Forest::predict_tree(int t, const Eigen::MatrixXd& X, Eigen::Index row) const {
  if (constant_) return constant_value_;
  return *leaf(trees_[static_cast<std::size_t>(t)], X, row);
}

Eigen::MatrixXd Forest::predict_proba(const Eigen::MatrixXd& X) const {
  if (kind_ != ForestKind::classification) fail(ErrorKind::invalid_input, "predict_proba on a regression forest");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(X.rows(), n_classes_);
  for (const auto& tree : trees_)
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double* v = leaf(tree, X, i);
      for (int c = 0; c < n_classes_; ++c) out(i, c) += v[c];
    }
  return out / static_cast<double>(trees_.size());
}

Eigen::VectorXd Forest::predict(const Eigen::MatrixXd& X) const {
  if (constant_) return Eigen::VectorXd::Constant(X.rows(), constant_value_);
  if (kind_ == ForestKind::classification) {
    const Eigen::MatrixXd p = predict_proba(X);
    return p.col(std::min(1, n_classes_ - 1));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  for (const auto& tree : trees_)
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] += *leaf(tree, X, i);
  return out / static_cast<double>(trees_.size());
}

Forest fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, ForestKind kind, const ForestParams& params,
                  std::uint64_t seed, int n_classes) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (y.size() != n) fail(ErrorKind::invalid_input, "fit_forest: X and y sizes differ");
  if (params.n_trees < 1) fail(ErrorKind::config, "n_trees must be at least 1");
  if (params.min_leaf < 1) fail(ErrorKind::config, "min_leaf must be at least 1");
  if (n < 2 * params.min_leaf) fail(ErrorKind::invalid_input, "fit_forest: fewer than 2*min_leaf rows");
  if (n > std::numeric_limits<std::uint32_t>::max()) fail(ErrorKind::invalid_input, "fit_forest: too many rows");

  Forest forest;
  forest.kind_ = kind;
  if (kind == ForestKind::classification) {
    const int inferred = static_cast<int>(y.maxCoeff()) + 1;
    forest.n_classes_ = n_classes > 0 ? n_classes : inferred;
    if (inferred > forest.n_classes_ || y.minCoeff() < 0) fail(ErrorKind::invalid_input, "fit_forest: class code out of range");
  } else if (y.maxCoeff() - y.minCoeff() == 0) {
    forest.constant_ = true;
    forest.constant_value_ = y[0];
    forest.oob_ = y;
    return forest;
  }
  const int K = forest.n_classes_;
  int mtry = params.mtry;
  if (mtry <= 0) {
    mtry = kind == ForestKind::classification ? static_cast<int>(std::floor(std::sqrt(static_cast<double>(p))))
                                              : static_cast<int>(p / 3);
  }
  mtry = std::clamp(mtry, 1, static_cast<int>(std::max<Eigen::Index>(p, 1)));

  const BinnedFeatures bf = bin_features(X, params.max_bins);
  Eigen::VectorXd oob_sum = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd oob_proba_sum = Eigen::MatrixXd::Zero(n, std::max(K, 1));
  Eigen::VectorXd oob_count = Eigen::VectorXd::Zero(n);
  std::vector<std::uint32_t> rows;
  std::vector<double> weight(static_cast<std::size_t>(n));
  forest.trees_.resize(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(seed, {static_cast<std::uint64_t>(t)});
    // The bootstrap sample as distinct rows with multiplicities.
    std::fill(weight.begin(), weight.end(), 0.0);
    for (Eigen::Index k = 0; k < n; ++k) weight[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)))] += 1.0;
    rows.clear();
    for (Eigen::Index i = 0; i < n; ++i)
      if (weight[static_cast<std::size_t>(i)] > 0) rows.push_back(static_cast<std::uint32_t>(i));
    Builder builder{bf, y, kind, K, mtry, params.min_leaf, rng, weight, {}, {}};
    builder.features.resize(static_cast<std::size_t>(p));
    std::iota(builder.features.begin(), builder.features.end(), 0);
    auto& tree = forest.trees_[static_cast<std::size_t>(t)];
    builder.build(tree, rows);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (weight[static_cast<std::size_t>(i)] > 0) continue;
      const double* v = forest.leaf(tree, X, i);
      oob_count[i] += 1;
      if (kind == ForestKind::regression) oob_sum[i] += *v;
      else
        for (int c = 0; c < K; ++c) oob_proba_sum(i, c) += v[c];
    }
  }
  // Rows that were in every bootstrap sample fall back to the full forest.
  std::vector<Eigen::Index> never;
  for (Eigen::Index i = 0; i < n; ++i)
    if (oob_count[i] == 0) never.push_back(i);
  if (kind == ForestKind::regression) {
    forest.oob_ = oob_sum.cwiseQuotient(oob_count.cwiseMax(1.0));
    for (Eigen::Index i : never) {
      double s = 0;
      for (int t = 0; t < params.n_trees; ++t) s += forest.predict_tree(t, X, i);
      forest.oob_[i] = s / params.n_trees;
    }
  } else {
    forest.oob_proba_ = oob_proba_sum.array().colwise() / oob_count.cwiseMax(1.0).array();
    for (Eigen::Index i : never) {
      Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(K);
      for (const auto& tree : forest.trees_) {
        const double* v = forest.leaf(tree, X, i);
        for (int c = 0; c < K; ++c) s[c] += v[c];
      }
      forest.oob_proba_.row(i) = s / params.n_trees;
    }
    forest.oob_ = forest.oob_proba_.col(std::min(1, K - 1));
  }
  return forest;
}

ForestConfig forest_config_from_json(const nlohmann::json& j) {
  ForestConfig c;
  try {
    c.forest.n_trees = j.value("n_trees", c.forest.n_trees);
    c.forest.mtry = j.value("mtry", c.forest.mtry);
    c.forest.min_leaf = j.value("min_leaf", c.forest.min_leaf);
    c.forest.max_bins = j.value("max_bins", c.forest.max_bins);
    c.pmm_donors = j.value("pmm_donors", c.pmm_donors);
    c.include_outcomes = j.value("include_outcomes", c.include_outcomes);
    c.one_hot_numeric_bins = j.value("one_hot_numeric_bins", c.one_hot_numeric_bins);
    c.one_hot_categorical = j.value("one_hot_categorical", c.one_hot_categorical);
    c.visit_order = visit_order_from_string(j.value("visit_order", std::string("monotone")));
    c.max_iter = j.value("max_iter", c.max_iter);
    c.m = j.value("m", c.m);
    c.seed = j.value("seed", c.seed);
    c.early_stop_tol = j.value("early_stop_tol", c.early_stop_tol);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("forest config: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const ForestConfig& c) {
  return {{"n_trees", c.forest.n_trees},
          {"mtry", c.forest.mtry},
          {"min_leaf", c.forest.min_leaf},
          {"max_bins", c.forest.max_bins},
          {"pmm_donors", c.pmm_donors},
          {"include_outcomes", c.include_outcomes},
          {"one_hot_numeric_bins", c.one_hot_numeric_bins},
          {"one_hot_categorical", c.one_hot_categorical},
          {"visit_order", to_string(c.visit_order)},
          {"max_iter", c.max_iter},
          {"m", c.m},
          {"early_stop_tol", c.early_stop_tol}};
}

std::vector<ImputedSet> run_forest_imputer(const Dataset& ds, const ForestConfig& cfg) {
  if (cfg.m < 1) fail(ErrorKind::config, "m must be at least 1");
  if (cfg.max_iter < 1) fail(ErrorKind::config, "max_iter must be at least 1");
  if (cfg.pmm_donors < 0) fail(ErrorKind::config, "pmm_donors must be nonnegative");
  const ImputationFrame frame = make_frame(ds, cfg.include_outcomes, cfg.one_hot_numeric_bins, cfg.one_hot_categorical);

  const detail::Univariate draw = [&](std::size_t c, const Eigen::VectorXd& y_obs, const Eigen::MatrixXd& X_obs_i,
                                      const Eigen::MatrixXd& X_mis_i, Rng& rng, std::vector<std::string>& flags) {
    // Trees ignore the intercept column.
    const Eigen::MatrixXd X_obs = X_obs_i.rightCols(X_obs_i.cols() - 1);
    const Eigen::MatrixXd X_mis = X_mis_i.rightCols(X_mis_i.cols() - 1);
    const auto& spec = frame.work.column(c).spec;
    const std::uint64_t seed = rng();
    Eigen::VectorXd out(X_mis.rows());
    if (spec.kind == Kind::numeric) {
      const Forest f = fit_forest(X_obs, y_obs, ForestKind::regression, cfg.forest, seed);
      if (f.constant()) flags.push_back("forest_constant:" + spec.name);
      if (cfg.pmm_donors > 0) {
        const Eigen::VectorXd& donors = f.oob_prediction();
        const Eigen::VectorXd pred = f.predict(X_mis);
        std::vector<Eigen::Index> order(static_cast<std::size_t>(donors.size()));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return donors[a] < donors[b]; });
        std::vector<double> sorted(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) sorted[i] = donors[order[i]];
        const int k = std::min<int>(cfg.pmm_donors, static_cast<int>(sorted.size()));
        for (Eigen::Index r = 0; r < out.size(); ++r) {
          const double target = pred[r];
          auto lo = static_cast<std::ptrdiff_t>(std::lower_bound(sorted.begin(), sorted.end(), target) - sorted.begin()) - 1;
          auto hi = lo + 1;
          std::vector<std::size_t> window;
          while (static_cast<int>(window.size()) < k) {
            const bool take_lo = hi >= static_cast<std::ptrdiff_t>(sorted.size()) ||
                                 (lo >= 0 && target - sorted[static_cast<std::size_t>(lo)] <= sorted[static_cast<std::size_t>(hi)] - target);
            window.push_back(static_cast<std::size_t>(take_lo ? lo-- : hi++));
          }
          out[r] = y_obs[order[window[rng.below(window.size())]]];
        }
      } else {
        for (Eigen::Index r = 0; r < out.size(); ++r)
          out[r] = f.predict_tree(static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.forest.n_trees))), X_mis, r);
      }
      return out;
    }
    const int K = spec.kind == Kind::binary ? 2 : static_cast<int>(spec.categories.size());
    const Forest f = fit_forest(X_obs, y_obs, ForestKind::classification, cfg.forest, seed, K);
    const Eigen::MatrixXd prob = f.predict_proba(X_mis);
    for (Eigen::Index r = 0; r < out.size(); ++r) {
      double u = rng.uniform();
      int chosen = K - 1;
      for (int k = 0; k < K; ++k) {
        if (u < prob(r, k)) {
          chosen = k;
          break;
        }
        u -= prob(r, k);
      }
      // Guard against rounding landing on a class with zero probability.
      if (prob(r, chosen) <= 0) chosen = static_cast<int>(std::max_element(prob.row(r).data(), prob.row(r).data() + K) - prob.row(r).data());
      out[r] = chosen;
    }
    return out;
  };

  const detail::ChainSettings settings{cfg.visit_order, cfg.max_iter, cfg.early_stop_tol};
  std::vector<ImputedSet> out(static_cast<std::size_t>(cfg.m));
  parallel_for(out.size(), cfg.threads, [&](std::size_t j) {
    Rng rng(cfg.seed, {static_cast<std::uint64_t>(j + 1)});
    ImputedSet set;
    set.index = static_cast<int>(j) + 1;
    const auto chain = detail::run_chain(frame, settings, draw, rng, set.flags);
    set.dataset = assemble(frame, chain.values, {});
    out[j] = std::move(set);
  });
  return out;
}

}  // namespace mieval
