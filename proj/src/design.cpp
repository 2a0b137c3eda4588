#include "mieval/design.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace mieval {

std::vector<DesignTerm> design_terms(const Dataset& ds, const std::vector<std::size_t>& columns) {
  std::vector<DesignTerm> terms;
  for (std::size_t j : columns) {
    const auto& spec = ds.column(j).spec;
    if (spec.kind != Kind::categorical) {
      terms.push_back({j, -1, spec.name});
      continue;
    }
    std::size_t ref = 0;
    if (spec.reference_category) {
      ref = static_cast<std::size_t>(std::find(spec.categories.begin(), spec.categories.end(), *spec.reference_category) -
                                     spec.categories.begin());
    }
    for (std::size_t k = 0; k < spec.categories.size(); ++k)
      if (k != ref) terms.push_back({j, static_cast<int>(k), indicator_name(spec.name, spec.categories[k])});
  }
  return terms;
}

Eigen::MatrixXd design_matrix(const Dataset& ds, const std::vector<DesignTerm>& terms,
                              const std::vector<std::size_t>& rows, bool intercept) {
  const Eigen::Index off = intercept ? 1 : 0;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(terms.size()) + off);
  if (intercept) X.col(0).setOnes();
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const auto& col = ds.column(terms[t].column);
    const int level = terms[t].level;
    auto out = X.col(static_cast<Eigen::Index>(t) + off);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t i = rows[r];
      double v;
      if (col.missing[i]) v = std::numeric_limits<double>::quiet_NaN();
      else if (level >= 0) v = static_cast<int>(col.values[i]) == level ? 1.0 : 0.0;
      else v = col.values[i];
      out[static_cast<Eigen::Index>(r)] = v;
    }
  }
  return X;
}

Eigen::MatrixXd design_matrix(const Dataset& ds, const std::vector<DesignTerm>& terms, bool intercept) {
  std::vector<std::size_t> rows(ds.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return design_matrix(ds, terms, rows, intercept);
}

std::vector<std::size_t> observed_rows(const Dataset& ds, std::size_t col) {
  std::vector<std::size_t> out;
  const auto& m = ds.column(col).missing;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!m[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> missing_rows(const Dataset& ds, std::size_t col) {
  std::vector<std::size_t> out;
  const auto& m = ds.column(col).missing;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) out.push_back(i);
  return out;
}

}  // namespace mieval
