#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "locrobust/neighborhoods.hpp"
#include "locrobust/observation.hpp"
#include "locrobust/random.hpp"

namespace locrobust {

using Eigen::Index;

/// Latent-variable model f(y | x) = integral of g_beta(y | a, x) pi_gamma(a | x) da.
class MixtureModel {
 public:
  virtual ~MixtureModel() = default;

  virtual Index beta_dim() const = 0;
  virtual Index gamma_dim() const = 0;
  virtual double log_g(const VectorXd& y, const VectorXd& a, const VectorXd& x,
                       const VectorXd& beta) const = 0;
  virtual double log_pi(const VectorXd& a, const VectorXd& x, const VectorXd& gamma) const = 0;
  virtual VectorXd sample_a(const VectorXd& x, const VectorXd& gamma, Rng& rng) const = 0;
  virtual VectorXd sample_y(const VectorXd& a, const VectorXd& x, const VectorXd& beta,
                            Rng& rng) const = 0;
  /// Delta(a, x, beta), the integrand of the default target.
  virtual double target(const VectorXd& a, const VectorXd& x, const VectorXd& beta) const = 0;

  virtual VectorXd grad_beta_log_g(const VectorXd& y, const VectorXd& a, const VectorXd& x,
                                   const VectorXd& beta) const;
  virtual VectorXd grad_gamma_log_pi(const VectorXd& a, const VectorXd& x,
                                     const VectorXd& gamma) const;
  virtual VectorXd grad_beta_target(const VectorXd& a, const VectorXd& x,
                                    const VectorXd& beta) const;

  /// Outcomes with equal keys have identical likelihoods g(y | ., x, beta)
  /// for every beta. Defaults to the raw outcome vector.
  virtual std::vector<double> y_key(const VectorXd& y, const VectorXd& x) const;

  /// log g(ys[i] | as[j], x, beta) for all pairs.
  virtual MatrixXd log_g_table(const std::vector<VectorXd>& ys, const std::vector<VectorXd>& as,
                               const VectorXd& x, const VectorXd& beta) const;
  /// One matrix per beta component: d log g(ys[i] | as[j]) / d beta_k.
  virtual std::vector<MatrixXd> grad_beta_log_g_table(const std::vector<VectorXd>& ys,
                                                      const std::vector<VectorXd>& as,
                                                      const VectorXd& x,
                                                      const VectorXd& beta) const;
};

/// Reference parameters and which blocks are treated as estimated.
struct MixtureParams {
  VectorXd beta;
  VectorXd gamma;
  bool estimate_beta = false;
  bool estimate_gamma = false;

  Index eta_dim() const {
    return (estimate_beta ? beta.size() : 0) + (estimate_gamma ? gamma.size() : 0);
  }
};

/// The quantity averaged over the latent distribution: either the model's
/// Delta(a, x, beta) or a component of beta itself.
struct Target {
  std::optional<Index> beta_index;

  static Target model_default() { return {}; }
  static Target beta_component(Index k) { return {k}; }

  double value(const MixtureModel& m, const VectorXd& a, const VectorXd& x,
               const VectorXd& beta) const;
  VectorXd grad_beta(const MixtureModel& m, const VectorXd& a, const VectorXd& x,
                     const VectorXd& beta) const;
};

/// Simulation panel for one covariate value x.
///
/// Draws are stored as weighted atoms: identical latent draws are merged and
/// outcome draws are merged by y_key, with multiplicities recorded. Every
/// S x S matrix of the fixed-S construction factors through these atoms, so
/// the panel holds the k_y x k_a posterior matrix G (G(i, j) = posterior mass
/// of latent atom j given outcome atom i, rows summing to one) instead of the
/// S x S version whose repeated columns it summarizes. Atoms may also carry
/// exact probabilities (times S) as weights, which turns every panel formula
/// into its exact discrete counterpart.
struct SimulationPanel {
  VectorXd x;
  MixtureParams params;
  double S = 0.0;

  std::vector<VectorXd> a_atoms;
  VectorXd a_weight;  // sums to S
  std::vector<VectorXd> y_atoms;
  VectorXd y_weight;  // sums to S

  MatrixXd W;      // g(y_i | a_j) / sum_j' a_weight_j' g(y_i | a_j')
  MatrixXd G;      // W * diag(a_weight)
  MatrixXd D;      // k_y x dim eta: posterior means of the eta-scores
  MatrixXd D_pinv;  // dim eta x k_y: D^dagger acting on outcome-atom values
  MatrixXd L_pi;   // k_a x dim eta: d log pi(a_j) / d eta (zero in beta slots)
  std::vector<MatrixXd> L_g;  // per eta component, k_y x k_a: d log g / d eta

  // Data mapped onto outcome atoms of the same cell.
  std::vector<VectorXd> data_atoms;
  VectorXd data_weight;           // counts
  std::vector<Index> data_index;  // observation -> data atom
  MatrixXd G_Y;
  MatrixXd D_Y;

  Index k_a() const { return static_cast<Index>(a_atoms.size()); }
  Index k_y() const { return static_cast<Index>(y_atoms.size()); }
  Index eta_dim() const { return D.cols(); }
  double n_data() const { return data_weight.sum(); }
  /// Q applied to a vector of outcome-atom values.
  VectorXd apply_Q(const VectorXd& v) const;
  /// Q as a k_y x k_y matrix (weighted projection off the columns of D).
  MatrixXd Q() const;
};

struct PanelOptions {
  long S = 1000;
  std::uint64_t seed = 0;
  /// Substream key distinguishing covariate cells and replications.
  std::uint64_t cell = 0;
  std::uint64_t replication = 0;
};

/// Draws S pairs (Y, A) from g_beta x pi_gamma at covariate value x and
/// builds the panel, mapping `data_y` onto it.
SimulationPanel simulate_panel(const MixtureModel& model, const MixtureParams& params,
                               const VectorXd& x, const std::vector<VectorXd>& data_y,
                               const PanelOptions& options);

/// Builds a panel from explicit weighted atoms.
SimulationPanel build_panel(const MixtureModel& model, const MixtureParams& params,
                            const VectorXd& x, std::vector<VectorXd> a_atoms, VectorXd a_weight,
                            std::vector<VectorXd> y_atoms, VectorXd y_weight,
                            const std::vector<VectorXd>& data_y);

/// Posterior rows for arbitrary outcomes against the panel's latent atoms.
struct PosteriorRows {
  MatrixXd G;  // rows sum to one
  MatrixXd D;
};

PosteriorRows posterior_rows(const MixtureModel& model, const SimulationPanel& panel,
                             const std::vector<VectorXd>& ys);

/// Target values on the latent atoms and the derivative of the reference
/// mean of the target with respect to eta.
struct TargetTerms {
  VectorXd values;  // k_a
  VectorXd d_delta;  // dim eta
  double mean = 0.0;
  MatrixXd grad_beta;  // k_a x dim beta
};

TargetTerms target_terms(const MixtureModel& model, const SimulationPanel& panel,
                         const Target& target);

/// Influence function on one covariate cell:
/// h(y) = p(y)' alpha + d(y)' coef_d + constant, with p(y) the posterior row.
struct SemiparamPlan {
  VectorXd alpha;
  VectorXd coef_d;
  double constant = 0.0;
};

double evaluate_plan(const SemiparamPlan& plan, const PosteriorRows& rows, Index i);
/// Plan values on the panel's data atoms.
VectorXd plan_on_data(const SemiparamPlan& plan, const SimulationPanel& panel);

SemiparamPlan plan_re(const SimulationPanel& panel, const TargetTerms& terms);
SemiparamPlan plan_eb(const SimulationPanel& panel, const TargetTerms& terms);
SemiparamPlan plan_mmse(const SimulationPanel& panel, const TargetTerms& terms,
                        const NeighborhoodSpec& spec);

/// Reference mean of Delta plus the mean of h over the data atoms.
double plan_estimate(const SimulationPanel& panel, const TargetTerms& terms,
                     const SemiparamPlan& plan);

double delta_mmse(const SimulationPanel& panel, const TargetTerms& terms,
                  const NeighborhoodSpec& spec);

/// Largest eigenvalue of G'QG.
double lambda_max(const SimulationPanel& panel);

/// Reference moments of a plan: sqrt(eps) sd(Delta - E[h | A]), Var h, E h.
struct PlanMoments {
  double bias = 0.0;
  double variance = 0.0;
  double mean = 0.0;
  /// Var(Delta - E[h | A]) after removing the fresh-draw noise.
  double residual_variance = 0.0;
  /// Monte Carlo standard error of residual_variance over the latent draws.
  double residual_variance_se = 0.0;
};

struct FreshDrawOptions {
  int draws_per_atom = 20;
  std::uint64_t seed = 0;
  std::uint64_t cell = 0;
  std::uint64_t replication = 0;
};

/// E[h | A] is estimated from `draws_per_atom` fresh outcome draws per latent
/// atom; the within-atom sampling variance is subtracted from the residual
/// variance (clamped at zero).
std::vector<PlanMoments> plan_moments(const MixtureModel& model, const SimulationPanel& panel,
                                      const TargetTerms& terms,
                                      const std::vector<SemiparamPlan>& plans, double epsilon,
                                      const FreshDrawOptions& options);

double bias_of_plan(const MixtureModel& model, const SimulationPanel& panel,
                    const TargetTerms& terms, const SemiparamPlan& plan, double epsilon,
                    const FreshDrawOptions& options);
double bias_re(const SimulationPanel& panel, const TargetTerms& terms, double epsilon);
double bias_eb(const MixtureModel& model, const SimulationPanel& panel, const TargetTerms& terms,
               double epsilon, const FreshDrawOptions& options);

/// One panel per distinct covariate value in the data.
struct PanelSet {
  std::vector<SimulationPanel> cells;
  std::vector<Index> obs_cell;
  long n = 0;
};

PanelSet build_panels(const MixtureModel& model, const MixtureParams& params,
                      const std::vector<Observation>& data, const PanelOptions& options);

double delta_re(const MixtureModel& model, const PanelSet& panels, const Target& target);
double delta_eb(const MixtureModel& model, const PanelSet& panels, const Target& target);

/// Convenience wrappers that build the panels first.
double delta_re(const MixtureModel& model, const std::vector<Observation>& data,
                const MixtureParams& params, const PanelOptions& options,
                const Target& target = Target::model_default());
double delta_eb(const MixtureModel& model, const std::vector<Observation>& data,
                const MixtureParams& params, const PanelOptions& options,
                const Target& target = Target::model_default());

/// Finite discrete mixture: g(y | a) table, prior over a, target values, and
/// optionally the eta-scores of f and the gradient of delta.
struct DiscreteProblem {
  MatrixXd g;       // |Y| x |A|, columns sum to one
  VectorXd prior;   // |A|
  VectorXd delta;   // |A|
  MatrixXd score;   // |Y| x dim eta (may have zero columns)
  VectorXd grad_eta_delta;

  VectorXd marginal() const { return g * prior; }
  MatrixXd posterior() const;  // E_{A|Y}, |Y| x |A|
  double reference_delta() const { return prior.dot(delta); }
};

struct FredholmResult {
  VectorXd h;
  double residual = 0.0;
  double delta_hat = 0.0;  // reference delta + data mean of h (if data given)
};

/// Solves [H_Y + (eps n)^{-1} I] h = E_{A|Y} Delta - delta, or its
/// score-projected version when `score` has columns. eps n may be +inf.
FredholmResult fredholm_exact(const DiscreteProblem& problem, double epsilon_n,
                              const VectorXd& data_counts = VectorXd());

}  // namespace locrobust
