#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "locrobust/random.hpp"

namespace locrobust::models {

using Eigen::VectorXd;

/// Potential outcomes with known propensity p(x) and reference conditional
/// means E[Y(d) | X = x] = x' gamma_d, Y(d) | x ~ N(x' gamma_d, sigma2).
struct AteModel {
  std::function<double(const VectorXd&)> propensity;
  VectorXd gamma0;
  VectorXd gamma1;
  double sigma2 = 1.0;

  double p(const VectorXd& x) const;
};

struct AteRecord {
  double y = 0.0;
  int d = 0;
  VectorXd x;
};

/// Minimum-MSE influence value. eps * n may be +inf (inverse propensity
/// weighting); finite values keep both denominators at least 1/(eps n).
double h_ate(double y, int d, const VectorXd& x, const AteModel& model, double epsilon_n);

/// Regression plug-in (1/n) sum x_i'(gamma1 - gamma0) plus the mean of h_ate.
double delta_ate_mmse(const std::vector<AteRecord>& data, const AteModel& model, double epsilon_n);

/// Augmented inverse propensity weighting estimator.
double delta_aipw(const std::vector<AteRecord>& data, const AteModel& model);

/// sqrt(eps) times the reference sd of the residual terms left by h_ate,
/// averaged over the covariates in `data`.
double ate_bias(const std::vector<AteRecord>& data, const AteModel& model, double epsilon,
                double epsilon_n);

std::vector<AteRecord> ate_simulate(const AteModel& model, const std::vector<VectorXd>& xs,
                                    Rng& rng);

}  // namespace locrobust::models
