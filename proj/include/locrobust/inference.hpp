#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "locrobust/neighborhoods.hpp"

namespace locrobust {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double x) const { return lo <= x && x <= hi; }
  bool contains(const Interval& other) const { return lo <= other.lo && other.hi <= hi; }
};

struct EstimateReport {
  std::string estimator_name;
  double point = 0.0;
  double bias_bound = 0.0;
  double sd_h = 0.0;
  long n = 0;
  Interval ci_robust;
  Interval ci_nonrobust;
  double epsilon = 0.0;
  std::optional<double> p;
};

/// sqrt(eps) * ||grad_delta - E[h * score]||_{Omega^{-1}}.
double worst_case_bias(const VectorXd& grad_delta, const VectorXd& h_score_cov,
                       const WeightedEuclidean& omega, double epsilon);

/// KL version: sqrt(eps) * sd(Delta - E[h | A]) under the reference weights.
double worst_case_bias_kl(const VectorXd& delta_minus_conditional_h, const VectorXd& weights,
                          double epsilon);

/// point +/- (b + sd * c_{1-mu/2} / sqrt(n)).
Interval confidence_interval(double point, double bias_bound, double sd_h, long n, double mu);

/// Bias-aware interval: half-width b * q with q the (1-mu) quantile of
/// |N(1, sd^2 / (b^2 n))|. Falls back to confidence_interval when b = 0.
Interval confidence_interval_ak(double point, double bias_bound, double sd_h, long n, double mu);

EstimateReport make_report(std::string name, double point, double bias_bound, double sd_h, long n,
                           double epsilon, double mu, std::optional<double> p = std::nullopt);

/// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
double sample_sd(const VectorXd& values);

}  // namespace locrobust
