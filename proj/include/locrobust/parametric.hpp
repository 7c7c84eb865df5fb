#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "locrobust/inference.hpp"
#include "locrobust/neighborhoods.hpp"
#include "locrobust/observation.hpp"
#include "locrobust/random.hpp"

namespace locrobust {

using Eigen::Index;

/// Parametric reference model f_theta(y | x) on the manifold theta(eta).
/// Only log_density, theta_of_eta and delta are mandatory; derivatives fall
/// back to central differences.
class ReferenceModel {
 public:
  virtual ~ReferenceModel() = default;

  virtual Index theta_dim() const = 0;
  virtual Index eta_dim() const = 0;
  virtual double log_density(const Observation& obs, const VectorXd& theta) const = 0;
  virtual VectorXd theta_of_eta(const VectorXd& eta) const = 0;
  virtual double delta(const VectorXd& theta) const = 0;

  virtual VectorXd score_theta(const Observation& obs, const VectorXd& theta) const;
  /// G_eta, dim eta x dim theta.
  virtual MatrixXd eta_jacobian(const VectorXd& eta) const;
  virtual VectorXd grad_delta(const VectorXd& theta) const;
  /// Conditional information E[s s' | x] when known in closed form.
  virtual std::optional<MatrixXd> information(const VectorXd& x, const VectorXd& theta) const;
  /// Draws y ~ f_theta(. | x). Required for Monte Carlo expectations.
  virtual VectorXd sample(const VectorXd& x, const VectorXd& theta, Rng& rng) const;
};

struct ScoreHessianBundle {
  VectorXd eta;
  VectorXd theta;
  MatrixXd H_theta;
  MatrixXd H_eta;
  MatrixXd G_eta;  // dim eta x dim theta
  VectorXd grad_theta_delta;
  VectorXd grad_eta_delta;
  MatrixXd scores;  // per-observation theta-scores (rows) when data is supplied
  Index covariate_count = 0;
};

struct ProjectedBundle {
  MatrixXd H_tilde;
  VectorXd grad_tilde_delta;
};

struct BundleOptions {
  /// Covariate sample; Hessians become averages of the conditional ones.
  std::vector<VectorXd> covariates;
  long mc_draws = 100000;
  std::uint64_t seed = 0;
  int threads = 1;
};

ScoreHessianBundle compute_bundle(const ReferenceModel& model, const VectorXd& eta,
                                  const BundleOptions& options = {},
                                  const std::vector<Observation>* data = nullptr);

ProjectedBundle project(const ScoreHessianBundle& bundle);

/// Diagonal Omega built from diag(H_tilde); zero entries take the mean positive entry.
WeightedEuclidean default_omega(const ProjectedBundle& projected);

/// h(y) = score_theta(y)' v.
struct ParametricPlan {
  VectorXd v;
  VectorXd cross_moment;  // E[h * score_theta] = H_theta v
  double reference_variance = 0.0;
};

ParametricPlan mmse_plan(const ScoreHessianBundle& bundle, const ProjectedBundle& projected,
                         const NeighborhoodSpec& spec);

double plan_bias(const ParametricPlan& plan, const ScoreHessianBundle& bundle,
                 const NeighborhoodSpec& spec);

double h_mmse(const Observation& obs, const ReferenceModel& model,
              const ScoreHessianBundle& bundle, const ProjectedBundle& projected,
              const NeighborhoodSpec& spec);

/// As h_mmse with a bundle built from a covariate sample.
double h_mmse_conditional(const Observation& obs, const ReferenceModel& model,
                          const ScoreHessianBundle& averaged_bundle,
                          const ProjectedBundle& projected, const NeighborhoodSpec& spec);

struct MleOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;
};

/// Maximizes the average reference log-likelihood over eta.
VectorXd fit_mle(const ReferenceModel& model, const std::vector<Observation>& data,
                 const VectorXd& start, const MleOptions& options = {});

struct EstimateOptions {
  double mu = 0.05;
  std::optional<double> p;
  BundleOptions bundle;
  /// Starting point for the MLE when no preliminary eta is supplied.
  std::optional<VectorXd> mle_start;
  MleOptions mle;
};

EstimateReport estimate(const ReferenceModel& model, const std::vector<Observation>& data,
                        const NeighborhoodSpec& spec, const std::optional<VectorXd>& preliminary_eta,
                        const EstimateOptions& options = {});

}  // namespace locrobust
