#pragma once

namespace locrobust {

double norm_pdf(double x);
double norm_cdf(double x);
/// log Phi(x), accurate in the far left tail.
double log_norm_cdf(double x);
/// Inverse of the standard normal CDF on (0, 1).
double norm_quantile(double p);

}  // namespace locrobust
