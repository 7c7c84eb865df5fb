#pragma once

#include <Eigen/Dense>
#include <variant>

namespace locrobust {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Squared distance ||theta0 - theta||^2_Omega with a symmetric positive-definite Omega.
class WeightedEuclidean {
 public:
  explicit WeightedEuclidean(MatrixXd omega);

  static WeightedEuclidean identity(Eigen::Index dim);

  const MatrixXd& omega() const { return omega_; }
  Eigen::Index dim() const { return omega_.rows(); }

  /// Omega^{-1} u through the stored Cholesky factor.
  VectorXd solve(const VectorXd& u) const;
  MatrixXd solve(const MatrixXd& u) const;
  /// Cholesky factor L with Omega = L L'.
  MatrixXd cholesky_lower() const { return llt_.matrixL(); }

 private:
  MatrixXd omega_;
  Eigen::LLT<MatrixXd> llt_;
};

/// Twice the Kullback-Leibler divergence on the latent density.
struct KLNeighborhood {};

using Distance = std::variant<WeightedEuclidean, KLNeighborhood>;

struct NeighborhoodSpec {
  Distance distance;
  double epsilon = 0.0;
  long n = 1;

  NeighborhoodSpec(Distance d, double eps, long sample_size);

  /// epsilon * n; +inf encodes the unregularized limit.
  double epsilon_n() const { return epsilon * static_cast<double>(n); }
  const WeightedEuclidean& euclidean() const;
  bool is_kl() const { return std::holds_alternative<KLNeighborhood>(distance); }
};

double dual_norm_euclidean(const VectorXd& u, const WeightedEuclidean& omega);

/// Standard deviation of q under the reference weights. Empty weights mean
/// uniform Monte Carlo weights.
double dual_norm_kl(const VectorXd& q, const VectorXd& weights = VectorXd());

struct TiltResult {
  double mean_shift = 0.0;   // eps^{-1/2} (E_tilted q - E_ref q)
  double kl_attained = 0.0;  // twice the KL divergence of the tilted law
  double tilt = 0.0;
};

/// Worst-case mean shift of q over a KL ball of size epsilon, by solving for
/// the exponential tilt that exhausts the ball.
TiltResult exponential_tilt_check(const VectorXd& q, const VectorXd& weights, double epsilon);

}  // namespace locrobust
