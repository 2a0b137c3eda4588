#pragma once

#include <cmath>
#include <limits>

namespace mieval::stats {

double normal_cdf(double x);
double normal_quantile(double p);
/// Student t quantile; df = +inf gives the normal quantile.
double t_quantile(double p, double df);
/// Upper tail P(X >= x) of a chi-square with df degrees of freedom.
double chi2_sf(double x, double df);

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline constexpr double inf = std::numeric_limits<double>::infinity();

}  // namespace mieval::stats
