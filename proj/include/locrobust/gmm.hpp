#pragma once

#include <Eigen/Dense>
#include <vector>

#include "locrobust/inference.hpp"
#include "locrobust/neighborhoods.hpp"
#include "locrobust/parametric.hpp"

namespace locrobust {

/// Model defined by moment restrictions E Psi(Y, theta0) = 0.
class MomentModel {
 public:
  virtual ~MomentModel() = default;

  virtual Index theta_dim() const = 0;
  virtual Index eta_dim() const = 0;
  virtual Index moment_dim() const = 0;
  virtual VectorXd psi(const Observation& obs, const VectorXd& theta) const = 0;
  virtual VectorXd theta_of_eta(const VectorXd& eta) const = 0;
  virtual double delta(const VectorXd& theta) const = 0;

  /// d Psi' / d theta, dim theta x dim Psi.
  virtual MatrixXd psi_jacobian(const Observation& obs, const VectorXd& theta) const;
  /// G_eta, dim eta x dim theta.
  virtual MatrixXd eta_jacobian(const VectorXd& eta) const;
  virtual VectorXd grad_delta(const VectorXd& theta) const;
};

/// K_theta is dim theta x dim Psi and K_eta is dim eta x dim Psi, so that
/// the local-robustness constraint reads grad_eta_delta + K_eta a = 0.
struct GmmBundle {
  MatrixXd V;
  MatrixXd K_theta;
  MatrixXd K_eta;
  VectorXd grad_theta_delta;
  VectorXd grad_eta_delta;
};

/// Sample analogs at theta(eta): V = mean Psi Psi', K_theta = mean dPsi'/dtheta.
GmmBundle gmm_bundle(const MomentModel& model, const std::vector<Observation>& data,
                     const VectorXd& eta);

/// Bundle implied by using the likelihood scores as moments.
GmmBundle gmm_bundle_from_likelihood(const ScoreHessianBundle& bundle);

VectorXd a_mmse(const GmmBundle& bundle, const WeightedEuclidean& omega, const NeighborhoodSpec& spec,
                double rel_cutoff = 1e-10);

double gmm_bias(const VectorXd& a, const GmmBundle& bundle, const WeightedEuclidean& omega,
                double epsilon);

/// epsilon * b(a)^2 / epsilon-free form: eps ||grad + K a||^2 + a' V a / n.
double gmm_objective(const VectorXd& a, const GmmBundle& bundle, const WeightedEuclidean& omega,
                     const NeighborhoodSpec& spec);

struct GmmEstimateOptions {
  double mu = 0.05;
  std::optional<double> p;
  /// Use this bundle instead of sample analogs.
  std::optional<GmmBundle> bundle;
  /// Use this coefficient vector instead of the minimum-MSE one.
  std::optional<VectorXd> a;
};

EstimateReport gmm_estimate(const MomentModel& model, const std::vector<Observation>& data,
                            const NeighborhoodSpec& spec, const VectorXd& preliminary_eta,
                            const GmmEstimateOptions& options = {});

}  // namespace locrobust
