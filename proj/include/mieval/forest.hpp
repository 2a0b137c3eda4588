#pragma once

// Random forests (bootstrap CART) and the forest chained-equations imputer.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mieval/imputation.hpp"

namespace mieval {

enum class ForestKind { regression, classification };

struct ForestParams {
  int n_trees = 50;
  int mtry = 0;       // 0: ⌊√p⌋ for classification, ⌊p/3⌋ for regression
  int min_leaf = 5;
  int max_bins = 64;  // split candidates per numeric feature
};

class Forest {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // go left when x <= threshold
    int left = -1, right = -1;
    int value = 0;  // leaf: offset into the tree's value array
  };
  struct Tree {
    std::vector<Node> nodes;
    std::vector<double> values;  // regression: one mean per leaf; classification: K proportions per leaf
  };

  ForestKind kind() const { return kind_; }
  int n_classes() const { return n_classes_; }
  int n_trees() const { return static_cast<int>(trees_.size()); }
  bool constant() const { return constant_; }

  /// Regression: mean over trees. Classification: P(class 1) for two classes.
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  /// Class proportions averaged over trees (rows x K).
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& X) const;
  /// Regression prediction of a single tree for one row.
  double predict_tree(int t, const Eigen::MatrixXd& X, Eigen::Index row) const;

  /// Out-of-bag predictions for the training rows; rows never out of bag get
  /// the full-forest prediction.
  const Eigen::VectorXd& oob_prediction() const { return oob_; }
  const Eigen::MatrixXd& oob_proba() const { return oob_proba_; }

 private:
  friend Forest fit_forest(const Eigen::MatrixXd&, const Eigen::VectorXd&, ForestKind, const ForestParams&,
                           std::uint64_t, int);
  const double* leaf(const Tree& tree, const Eigen::MatrixXd& X, Eigen::Index row) const;

  ForestKind kind_ = ForestKind::regression;
  int n_classes_ = 0;
  bool constant_ = false;
  double constant_value_ = 0.0;
  std::vector<Tree> trees_;
  Eigen::VectorXd oob_;
  Eigen::MatrixXd oob_proba_;
};

/// Classification targets are class codes 0..n_classes-1 (n_classes = 0:
/// inferred as max + 1). Tree t draws from the stream (seed, t).
Forest fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, ForestKind kind, const ForestParams& params,
                  std::uint64_t seed, int n_classes = 0);

struct ForestConfig {
  ForestParams forest;
  int pmm_donors = 0;
  bool include_outcomes = true;
  bool one_hot_numeric_bins = false;
  bool one_hot_categorical = false;
  VisitOrder visit_order = VisitOrder::monotone;
  int max_iter = 21;
  int m = 5;
  std::uint64_t seed = 1;
  double early_stop_tol = 1e-4;
  int threads = 1;
};

ForestConfig forest_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ForestConfig& cfg);

/// Numeric targets: a random tree's prediction per missing row, or with
/// pmm_donors > 0 the observed value of a random donor among the nearest OOB
/// predictions. Binary and categorical targets: a draw from the forest's
/// class proportions.
std::vector<ImputedSet> run_forest_imputer(const Dataset& ds, const ForestConfig& cfg);

}  // namespace mieval
