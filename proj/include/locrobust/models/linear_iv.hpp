#pragma once

#include <Eigen/Dense>
#include <vector>

#include "locrobust/parametric.hpp"

namespace locrobust::models {

/// y = x'beta + u with u = rho'v + xi, x = Pi z + v, xi ~ N(0, sigma2).
/// The reference model sets rho = 0 (x exogenous); theta = (beta, rho), eta = beta.
/// Observations carry y = (y, x_1..x_k) and covariates z.
class LinearIVModel final : public ReferenceModel {
 public:
  LinearIVModel(MatrixXd pi, MatrixXd sigma_v, MatrixXd sigma_z, double sigma2, VectorXd c);

  Index theta_dim() const override { return 2 * k_; }
  Index eta_dim() const override { return k_; }
  Index x_dim() const { return k_; }
  Index z_dim() const { return pi_.cols(); }

  double log_density(const Observation& obs, const VectorXd& theta) const override;
  VectorXd theta_of_eta(const VectorXd& eta) const override;
  double delta(const VectorXd& theta) const override { return c_.dot(theta.head(k_)); }
  VectorXd score_theta(const Observation& obs, const VectorXd& theta) const override;
  MatrixXd eta_jacobian(const VectorXd& eta) const override;
  VectorXd grad_delta(const VectorXd& theta) const override;
  /// Conditional information given z; with empty z, the average over z.
  std::optional<MatrixXd> information(const VectorXd& z, const VectorXd& theta) const override;
  VectorXd sample(const VectorXd& z, const VectorXd& theta, Rng& rng) const override;

  const MatrixXd& pi() const { return pi_; }
  const MatrixXd& sigma_v() const { return sigma_v_; }
  const MatrixXd& sigma_z() const { return sigma_z_; }
  MatrixXd sigma_x() const { return pi_ * sigma_z_ * pi_.transpose() + sigma_v_; }
  double sigma2() const { return sigma2_; }
  const VectorXd& c() const { return c_; }

  Observation make_observation(double y, const VectorXd& x, const VectorXd& z) const;
  VectorXd draw_z(Rng& rng) const;

 private:
  MatrixXd pi_, sigma_v_, sigma_z_;
  double sigma2_;
  VectorXd c_;
  Index k_;
  Eigen::LLT<MatrixXd> chol_v_, chol_z_;
};

/// Closed-form minimum-MSE influence function interpolating between the OLS
/// direction (eps n = 0) and the IV direction (eps n -> inf); omega_rho is
/// the rho-block of the weight matrix.
double h_linear(double y, const VectorXd& x, const VectorXd& z, const VectorXd& beta,
                const LinearIVModel& model, double epsilon_n, const MatrixXd& omega_rho);

/// (y - x'beta) (Pi z)' (Pi Sigma_Z Pi')^{-1} c.
double h_linear_iv_limit(double y, const VectorXd& x, const VectorXd& z, const VectorXd& beta,
                         const LinearIVModel& model);

/// eps(p) = 4 sigma2 Phi^{-1}(p)^2 / (n lambda_max(Omega_rho^{-1/2}(S_V - S_V S_X^{-1} S_V)Omega_rho^{-1/2})).
double epsilon_linear(double p, long n, const LinearIVModel& model, const MatrixXd& omega_rho);

/// Least-squares coefficients of y on x.
VectorXd ols(const std::vector<Observation>& data, Index k);

/// Two-stage least squares of y on x with instruments z.
VectorXd two_stage_least_squares(const std::vector<Observation>& data, Index k);

/// Plug-in reference model from data: Pi by least squares of x on z,
/// uncentered sample Sigma_Z, residual Sigma_V, and the OLS residual variance.
LinearIVModel fit_linear_iv(const std::vector<Observation>& data, Index k, VectorXd c);

}  // namespace locrobust::models
