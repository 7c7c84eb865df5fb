#include "locrobust/normal.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>

#include "locrobust/error.hpp"

namespace locrobust {

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_norm_cdf(double x) {
  if (x > -30.0) return std::log(norm_cdf(x));
  // Asymptotic Mills-ratio expansion; erfc underflows around x = -38.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double norm_quantile(double p) {
  require(p > 0.0 && p < 1.0, "norm_quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace locrobust
