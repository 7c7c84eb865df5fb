#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "locrobust/parametric.hpp"
#include "locrobust/quadrature.hpp"
#include "locrobust/semiparam.hpp"

namespace locrobust::models {

/// Y_t = 1{beta Y_{t-1} + A + U_t >= 0}, U_t ~ N(0,1), t = 1..T, with the
/// initial condition Y_0 as the covariate and A | Y_0 ~ N(mu1 + mu2 Y_0, sigma^2)
/// under the reference model. Observations: y = (Y_1..Y_T), x = (Y_0).
struct ProbitParams {
  double beta = 0.5;
  double mu1 = -0.25;
  double mu2 = 0.5;
  double sigma = 0.8;
  int T = 5;

  VectorXd gamma() const { return (VectorXd(3) << mu1, mu2, sigma).finished(); }
};

double probit_loglik(const VectorXd& y_path, double y0, double a, double beta);
double probit_delta(double a, double beta);

/// Transition counts (n00, n01, n10, n11) of a path started at y0.
Eigen::Vector4d transition_counts(const VectorXd& y_path, double y0);

class DynProbitModel final : public MixtureModel {
 public:
  explicit DynProbitModel(int T);

  int T() const { return T_; }
  Index beta_dim() const override { return 1; }
  Index gamma_dim() const override { return 3; }
  double log_g(const VectorXd& y, const VectorXd& a, const VectorXd& x,
               const VectorXd& beta) const override;
  double log_pi(const VectorXd& a, const VectorXd& x, const VectorXd& gamma) const override;
  VectorXd sample_a(const VectorXd& x, const VectorXd& gamma, Rng& rng) const override;
  VectorXd sample_y(const VectorXd& a, const VectorXd& x, const VectorXd& beta,
                    Rng& rng) const override;
  double target(const VectorXd& a, const VectorXd& x, const VectorXd& beta) const override;

  VectorXd grad_beta_log_g(const VectorXd& y, const VectorXd& a, const VectorXd& x,
                           const VectorXd& beta) const override;
  VectorXd grad_gamma_log_pi(const VectorXd& a, const VectorXd& x,
                             const VectorXd& gamma) const override;
  VectorXd grad_beta_target(const VectorXd& a, const VectorXd& x,
                            const VectorXd& beta) const override;
  std::vector<double> y_key(const VectorXd& y, const VectorXd& x) const override;
  MatrixXd log_g_table(const std::vector<VectorXd>& ys, const std::vector<VectorXd>& as,
                       const VectorXd& x, const VectorXd& beta) const override;
  std::vector<MatrixXd> grad_beta_log_g_table(const std::vector<VectorXd>& ys,
                                              const std::vector<VectorXd>& as, const VectorXd& x,
                                              const VectorXd& beta) const override;

 private:
  int T_;
};

/// Integrated-likelihood view of the same model with theta = (beta, mu1, mu2, sigma)
/// and eta = beta; (mu1, mu2, sigma) are held at `fixed`.
class ProbitReferenceModel final : public ReferenceModel {
 public:
  ProbitReferenceModel(const ProbitParams& fixed, int quadrature_nodes = 40);

  Index theta_dim() const override { return 4; }
  Index eta_dim() const override { return 1; }
  double log_density(const Observation& obs, const VectorXd& theta) const override;
  VectorXd theta_of_eta(const VectorXd& eta) const override;
  double delta(const VectorXd& theta) const override;
  VectorXd score_theta(const Observation& obs, const VectorXd& theta) const override;
  MatrixXd eta_jacobian(const VectorXd& eta) const override;
  VectorXd sample(const VectorXd& x, const VectorXd& theta, Rng& rng) const override;

 private:
  ProbitParams fixed_;
  DynProbitModel mixture_;
  GaussHermite rule_;
};

enum class ProbitDgp { kReference, kLogNormal, kShifted };

ProbitDgp parse_probit_dgp(const std::string& name);
std::string to_string(ProbitDgp dgp);

struct ProbitDataset {
  std::vector<Observation> obs;
  VectorXd a;  // realized latent effects
};

/// Y_0 ~ Bernoulli(1/2); A has mean mu1 + mu2 Y_0 (+ nu when shifted) and sd
/// sigma, normal except under kLogNormal, where it is a standardized
/// right-skewed log-normal (shape one).
ProbitDataset probit_simulate(const ProbitParams& params, long n, ProbitDgp dgp, double nu,
                              std::uint64_t seed, std::uint64_t replication = 0);

/// Population value of E[Phi(beta + A) - Phi(A)] under a DGP.
double probit_true_delta(const ProbitParams& params, ProbitDgp dgp, double nu, int nodes = 200);

/// Within-individual OLS of y_t on y_{t-1} (linear probability benchmark).
double linear_probability_fe(const std::vector<Observation>& data);

}  // namespace locrobust::models
