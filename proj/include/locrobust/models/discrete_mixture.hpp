#pragma once

#include <Eigen/Dense>
#include <vector>

#include "locrobust/semiparam.hpp"

namespace locrobust::models {

/// Finite mixture: outcomes are indices into a finite support, latent values
/// are indices into a finite grid. g(y | a) is a fixed column-stochastic
/// table and the latent prior is exponentially tilted by a scalar gamma:
/// pi_gamma(j) proportional to base(j) exp(gamma * stat(j)). beta is empty.
class DiscreteMixtureModel final : public MixtureModel {
 public:
  DiscreteMixtureModel(MatrixXd g, VectorXd base_prior, VectorXd delta, VectorXd tilt_stat);

  Index beta_dim() const override { return 0; }
  Index gamma_dim() const override { return 1; }
  double log_g(const VectorXd& y, const VectorXd& a, const VectorXd& x,
               const VectorXd& beta) const override;
  double log_pi(const VectorXd& a, const VectorXd& x, const VectorXd& gamma) const override;
  VectorXd sample_a(const VectorXd& x, const VectorXd& gamma, Rng& rng) const override;
  VectorXd sample_y(const VectorXd& a, const VectorXd& x, const VectorXd& beta,
                    Rng& rng) const override;
  double target(const VectorXd& a, const VectorXd& x, const VectorXd& beta) const override;
  VectorXd grad_gamma_log_pi(const VectorXd& a, const VectorXd& x,
                             const VectorXd& gamma) const override;
  VectorXd grad_beta_target(const VectorXd& a, const VectorXd& x,
                            const VectorXd& beta) const override;

  Index outcomes() const { return g_.rows(); }
  Index grid() const { return g_.cols(); }
  const MatrixXd& g() const { return g_; }
  VectorXd prior(double gamma) const;

  /// Exact discrete problem; with `estimate_gamma` the tilt is treated as
  /// the estimated reference parameter.
  DiscreteProblem to_problem(double gamma, bool estimate_gamma) const;

  /// Panel whose atoms carry exact probabilities times S.
  SimulationPanel exact_panel(const MixtureParams& params, double S,
                              const std::vector<VectorXd>& data_y) const;

  static VectorXd index(Index i) { return VectorXd::Constant(1, static_cast<double>(i)); }

 private:
  Index a_index(const VectorXd& a) const;
  Index y_index(const VectorXd& y) const;

  MatrixXd g_;
  VectorXd base_;
  VectorXd delta_;
  VectorXd stat_;
};

}  // namespace locrobust::models
