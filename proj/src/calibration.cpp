#include "locrobust/calibration.hpp"

#include <cmath>

#include "locrobust/error.hpp"
#include "locrobust/linalg.hpp"
#include "locrobust/normal.hpp"
#include "locrobust/parallel.hpp"

namespace locrobust {

namespace {

void check_p(double p, long n) {
  require(p > 0.0 && p < 1.0, "calibration: p must lie in (0, 1)");
  require(n >= 1, "calibration: n must be >= 1");
}

double epsilon_from(double p, long n, double lambda) {
  const double z = norm_quantile(p);
  return 4.0 * z * z / (static_cast<double>(n) * lambda);
}

}  // namespace

double whitened_lambda_max(const ProjectedBundle& projected, const WeightedEuclidean& omega) {
  require(projected.H_tilde.rows() == omega.dim(), "whitened_lambda_max: dimension mismatch");
  const MatrixXd l = omega.cholesky_lower();
  const auto tri = l.triangularView<Eigen::Lower>();
  const MatrixXd half = tri.solve(projected.H_tilde);
  const MatrixXd whitened = tri.solve(half.transpose());
  return linalg::lambda_max_symmetric(whitened);
}

CalibrationResult epsilon_parametric(double p, long n, const ProjectedBundle& projected,
                                     const WeightedEuclidean& omega) {
  check_p(p, n);
  const double lambda = whitened_lambda_max(projected, omega);
  if (!(lambda > 1e-14)) throw UnboundedEpsilonError();
  return {p, epsilon_from(p, n, lambda), lambda, n};
}

CalibrationResult epsilon_semiparam(double p, long n, double lambda_max) {
  check_p(p, n);
  require(std::isfinite(lambda_max) && lambda_max > 0.0,
          "epsilon_semiparam: lambda_max must be positive");
  return {p, epsilon_from(p, n, lambda_max), lambda_max, n};
}

DetectionError detection_error_mc(const ReferenceModel& model, const VectorXd& theta0,
                                  const VectorXd& eta, long n, long reps, std::uint64_t seed,
                                  const std::vector<VectorXd>& covariates, int threads) {
  require(n >= 1, "detection_error_mc: n must be >= 1");
  require(reps >= 100, "detection_error_mc: need at least 100 replications");
  require(theta0.size() == model.theta_dim(), "detection_error_mc: theta0 has the wrong size");
  const VectorXd theta1 = model.theta_of_eta(eta);
  std::vector<VectorXd> xs = covariates;
  if (xs.empty()) xs.emplace_back();

  auto misclassified = [](double llr) { return llr > 0.0 ? 1.0 : (llr == 0.0 ? 0.5 : 0.0); };
  std::vector<double> per_rep(static_cast<std::size_t>(reps));
  parallel_for(per_rep.size(), threads, [&](std::size_t r) {
    Rng rng = make_rng(seed, {tag(Stream::kDetection), r});
    double llr0 = 0.0;  // data from theta0: evidence for theta(eta)
    double llr1 = 0.0;  // data from theta(eta): evidence for theta0
    for (long i = 0; i < n; ++i) {
      const VectorXd& x = xs[static_cast<std::size_t>(i) % xs.size()];
      const Observation a{model.sample(x, theta0, rng), x};
      llr0 += model.log_density(a, theta1) - model.log_density(a, theta0);
      const Observation b{model.sample(x, theta1, rng), x};
      llr1 += model.log_density(b, theta0) - model.log_density(b, theta1);
    }
    per_rep[r] = 0.5 * (misclassified(llr0) + misclassified(llr1));
  });
  const Eigen::Map<const VectorXd> v(per_rep.data(), reps);
  DetectionError out;
  out.replications = reps;
  out.estimate = v.mean();
  const double var = (v.array() - out.estimate).square().sum() / static_cast<double>(reps - 1);
  out.standard_error = std::sqrt(var / static_cast<double>(reps));
  return out;
}

}  // namespace locrobust
