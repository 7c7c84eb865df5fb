#include "locrobust/neighborhoods.hpp"

#include <cmath>
#include <limits>

#include "locrobust/error.hpp"
#include "locrobust/linalg.hpp"

namespace locrobust {

WeightedEuclidean::WeightedEuclidean(MatrixXd omega) : omega_(std::move(omega)) {
  require(omega_.rows() == omega_.cols() && omega_.rows() > 0,
          "WeightedEuclidean: omega must be a non-empty square matrix");
  require(omega_.allFinite(), "WeightedEuclidean: omega has non-finite entries");
  require(linalg::asymmetry(omega_) <= 1e-12, "WeightedEuclidean: omega is not symmetric");
  llt_.compute(omega_);
  require(llt_.info() == Eigen::Success, "WeightedEuclidean: omega is not positive definite");
}

WeightedEuclidean WeightedEuclidean::identity(Eigen::Index dim) {
  return WeightedEuclidean(MatrixXd::Identity(dim, dim));
}

VectorXd WeightedEuclidean::solve(const VectorXd& u) const {
  require(u.size() == dim(), "WeightedEuclidean: dimension mismatch");
  return llt_.solve(u);
}

MatrixXd WeightedEuclidean::solve(const MatrixXd& u) const {
  require(u.rows() == dim(), "WeightedEuclidean: dimension mismatch");
  return llt_.solve(u);
}

NeighborhoodSpec::NeighborhoodSpec(Distance d, double eps, long sample_size)
    : distance(std::move(d)), epsilon(eps), n(sample_size) {
  require(!std::isnan(eps) && eps >= 0.0, "NeighborhoodSpec: epsilon must be >= 0");
  require(sample_size >= 1, "NeighborhoodSpec: n must be >= 1");
}

const WeightedEuclidean& NeighborhoodSpec::euclidean() const {
  const auto* w = std::get_if<WeightedEuclidean>(&distance);
  require(w != nullptr, "NeighborhoodSpec: a weighted Euclidean distance is required");
  return *w;
}

double dual_norm_euclidean(const VectorXd& u, const WeightedEuclidean& omega) {
  require(u.size() == omega.dim(), "dual_norm_euclidean: dimension mismatch");
  const double q = u.dot(omega.solve(u));
  return std::sqrt(std::max(q, 0.0));
}

namespace {

VectorXd normalized_weights(const VectorXd& q, const VectorXd& weights) {
  require(q.size() > 0, "KL dual norm: empty input");
  if (weights.size() == 0) return VectorXd::Constant(q.size(), 1.0 / static_cast<double>(q.size()));
  require(weights.size() == q.size(), "KL dual norm: weights and values differ in length");
  require((weights.array() >= 0.0).all(), "KL dual norm: negative weight");
  require(std::abs(weights.sum() - 1.0) <= 1e-10, "KL dual norm: weights must sum to one");
  return weights;
}

}  // namespace

double dual_norm_kl(const VectorXd& q, const VectorXd& weights) {
  const VectorXd w = normalized_weights(q, weights);
  const double mean = w.dot(q);
  const double var = w.dot((q.array() - mean).square().matrix());
  return std::sqrt(std::max(var, 0.0));
}

TiltResult exponential_tilt_check(const VectorXd& q, const VectorXd& weights, double epsilon) {
  require(epsilon > 0.0, "exponential_tilt_check: epsilon must be positive");
  const VectorXd w = normalized_weights(q, weights);
  const double base_mean = w.dot(q);
  const double spread = q.maxCoeff() - q.minCoeff();
  if (spread == 0.0) return {};

  // k(t) = log E exp(t q); d(t) = 2 [t k'(t) - k(t)] is increasing in t >= 0.
  auto moments = [&](double t) {
    const double shift = t * q.maxCoeff();
    const Eigen::ArrayXd e = w.array() * (t * q.array() - shift).exp();
    const double z = e.sum();
    const double k = std::log(z) + shift;
    const double k1 = (e * q.array()).sum() / z;
    return std::pair{k, k1};
  };
  auto divergence = [&](double t) {
    auto [k, k1] = moments(t);
    return 2.0 * (t * k1 - k);
  };

  double hi = 1.0 / spread;
  int doublings = 0;
  while (divergence(hi) < epsilon) {
    hi *= 2.0;
    if (++doublings > 200)
      throw NumericalError("exponential_tilt_check: epsilon exceeds the largest attainable divergence");
  }
  double lo = 0.0;
  int steps = 0;
  while (hi - lo > 1e-15 * hi) {
    if (++steps > 200) throw NumericalError("exponential_tilt_check: bisection did not converge");
    const double mid = 0.5 * (lo + hi);
    if (divergence(mid) < epsilon) lo = mid;
    else hi = mid;
  }
  const double t = 0.5 * (lo + hi);
  TiltResult r;
  r.tilt = t;
  r.kl_attained = divergence(t);
  r.mean_shift = (moments(t).second - base_mean) / std::sqrt(epsilon);
  return r;
}

}  // namespace locrobust
