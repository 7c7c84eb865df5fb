#include "locrobust/inference.hpp"

#include <cmath>

#include "locrobust/error.hpp"
#include "locrobust/normal.hpp"

namespace locrobust {

double worst_case_bias(const VectorXd& grad_delta, const VectorXd& h_score_cov,
                       const WeightedEuclidean& omega, double epsilon) {
  require(grad_delta.size() == h_score_cov.size(), "worst_case_bias: dimension mismatch");
  require(epsilon >= 0.0, "worst_case_bias: epsilon must be >= 0");
  return std::sqrt(epsilon) * dual_norm_euclidean(grad_delta - h_score_cov, omega);
}

double worst_case_bias_kl(const VectorXd& delta_minus_conditional_h, const VectorXd& weights,
                          double epsilon) {
  require(epsilon >= 0.0, "worst_case_bias_kl: epsilon must be >= 0");
  return std::sqrt(epsilon) * dual_norm_kl(delta_minus_conditional_h, weights);
}

namespace {

void check_interval_inputs(double bias_bound, double sd_h, long n, double mu) {
  require(mu > 0.0 && mu < 1.0, "confidence interval: mu must lie in (0, 1)");
  require(n >= 1, "confidence interval: n must be >= 1");
  require(bias_bound >= 0.0 && sd_h >= 0.0, "confidence interval: negative bias bound or sd");
}

}  // namespace

Interval confidence_interval(double point, double bias_bound, double sd_h, long n, double mu) {
  check_interval_inputs(bias_bound, sd_h, n, mu);
  const double c = norm_quantile(1.0 - mu / 2.0);
  const double half = bias_bound + sd_h * c / std::sqrt(static_cast<double>(n));
  return {point - half, point + half};
}

Interval confidence_interval_ak(double point, double bias_bound, double sd_h, long n, double mu) {
  check_interval_inputs(bias_bound, sd_h, n, mu);
  if (bias_bound == 0.0) return confidence_interval(point, bias_bound, sd_h, n, mu);
  const double s = sd_h / (bias_bound * std::sqrt(static_cast<double>(n)));
  if (s == 0.0) return {point - bias_bound, point + bias_bound};
  auto cdf = [s](double q) { return norm_cdf((q - 1.0) / s) - norm_cdf((-q - 1.0) / s); };
  const double target = 1.0 - mu;
  double lo = 1.0;
  double hi = 1.0 + 10.0 * s;
  while (cdf(hi) < target) hi = 1.0 + 2.0 * (hi - 1.0);
  int steps = 0;
  while (hi - lo > 1e-10) {
    if (++steps > 400) throw NumericalError("confidence_interval_ak: bisection did not converge");
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < target) lo = mid;
    else hi = mid;
  }
  const double half = bias_bound * 0.5 * (lo + hi);
  return {point - half, point + half};
}

EstimateReport make_report(std::string name, double point, double bias_bound, double sd_h, long n,
                           double epsilon, double mu, std::optional<double> p) {
  EstimateReport r;
  r.estimator_name = std::move(name);
  r.point = point;
  r.bias_bound = bias_bound;
  r.sd_h = sd_h;
  r.n = n;
  r.epsilon = epsilon;
  r.p = p;
  r.ci_robust = confidence_interval(point, bias_bound, sd_h, n, mu);
  r.ci_nonrobust = confidence_interval(point, 0.0, sd_h, n, mu);
  return r;
}

double sample_sd(const VectorXd& values) {
  if (values.size() < 2) return 0.0;
  const double mean = values.mean();
  const double ss = (values.array() - mean).square().sum();
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace locrobust
