#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "locrobust/neighborhoods.hpp"
#include "locrobust/parametric.hpp"

namespace locrobust {

struct CalibrationResult {
  double p = 0.0;
  double epsilon = 0.0;
  double lambda_max_used = 0.0;
  long n = 0;
};

/// Largest eigenvalue of Omega^{-1/2} H_tilde Omega^{-1/2}.
double whitened_lambda_max(const ProjectedBundle& projected, const WeightedEuclidean& omega);

/// eps(p) = 4 Phi^{-1}(p)^2 / (n lambda_max). Throws UnboundedEpsilonError
/// when lambda_max <= 1e-14.
CalibrationResult epsilon_parametric(double p, long n, const ProjectedBundle& projected,
                                     const WeightedEuclidean& omega);

CalibrationResult epsilon_semiparam(double p, long n, double lambda_max);

struct DetectionError {
  double estimate = 0.0;
  double standard_error = 0.0;
  long replications = 0;
};

/// Monte Carlo probability of misclassifying f_theta0 against f_theta(eta)
/// with the full-sample likelihood-ratio sign; ties count one half.
/// `covariates` are cycled through when the model is conditional.
DetectionError detection_error_mc(const ReferenceModel& model, const VectorXd& theta0,
                                  const VectorXd& eta, long n, long reps, std::uint64_t seed,
                                  const std::vector<VectorXd>& covariates = {}, int threads = 1);

}  // namespace locrobust
