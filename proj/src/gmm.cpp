#include "locrobust/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "locrobust/error.hpp"
#include "locrobust/linalg.hpp"
#include "locrobust/numdiff.hpp"

namespace locrobust {

MatrixXd MomentModel::psi_jacobian(const Observation& obs, const VectorXd& theta) const {
  return numdiff::jacobian_t([&](const VectorXd& t) { return psi(obs, t); }, theta);
}

MatrixXd MomentModel::eta_jacobian(const VectorXd& eta) const {
  if (eta.size() == 0) return MatrixXd(0, theta_dim());
  return numdiff::jacobian_t([&](const VectorXd& e) { return theta_of_eta(e); }, eta);
}

VectorXd MomentModel::grad_delta(const VectorXd& theta) const {
  return numdiff::gradient([&](const VectorXd& t) { return delta(t); }, theta);
}

GmmBundle gmm_bundle(const MomentModel& model, const std::vector<Observation>& data,
                     const VectorXd& eta) {
  require(!data.empty(), "gmm_bundle: empty data");
  require(eta.size() == model.eta_dim(), "gmm_bundle: eta has the wrong dimension");
  const VectorXd theta = model.theta_of_eta(eta);
  const Index m = model.moment_dim();
  GmmBundle b;
  b.V = MatrixXd::Zero(m, m);
  b.K_theta = MatrixXd::Zero(model.theta_dim(), m);
  for (const auto& obs : data) {
    const VectorXd psi = model.psi(obs, theta);
    require(psi.size() == m, "gmm_bundle: psi has the wrong dimension");
    b.V.noalias() += psi * psi.transpose();
    b.K_theta += model.psi_jacobian(obs, theta);
  }
  const double n = static_cast<double>(data.size());
  b.V = linalg::symmetrize(b.V / n);
  b.K_theta /= n;
  const MatrixXd g = model.eta_jacobian(eta);
  b.K_eta = g * b.K_theta;
  b.grad_theta_delta = model.grad_delta(theta);
  b.grad_eta_delta = g * b.grad_theta_delta;
  return b;
}

GmmBundle gmm_bundle_from_likelihood(const ScoreHessianBundle& sb) {
  GmmBundle b;
  b.V = sb.H_theta;
  b.K_theta = -sb.H_theta;
  b.K_eta = -sb.G_eta * sb.H_theta;
  b.grad_theta_delta = sb.grad_theta_delta;
  b.grad_eta_delta = sb.grad_eta_delta;
  return b;
}

namespace {

// Pseudo-inverse of B = KOK + V / en computed in V-whitened coordinates:
// with R = U_r diag(lambda_r^{-1/2}) over the retained eigenpairs of V,
// B^dagger = R (R' KOK R + I / en)^{-1} R'. Every vector this operator is
// applied to lies in the range of K_theta' (K_eta factors through K_theta),
// so eigendirections of R' KOK R below the cutoff carry only rounding noise
// and are dropped; otherwise 1/(0 + 1/en) would amplify that noise by en.
// The 1/en shift is added to exact eigenvalues, so large finite en and
// en = inf agree. When V has null directions that KOK does not share, the
// direct pseudo-inverse of B is used instead.
MatrixXd regularized_pinv(const MatrixXd& kok, const MatrixXd& v, double en, double rel_cutoff) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> ev(v);
  const VectorXd& lam = ev.eigenvalues();
  const double top = lam.cwiseAbs().maxCoeff();
  std::vector<Index> keep, drop;
  for (Index j = 0; j < lam.size(); ++j) (lam(j) > rel_cutoff * top ? keep : drop).push_back(j);
  if (!drop.empty()) {
    MatrixXd null(v.rows(), static_cast<Index>(drop.size()));
    for (std::size_t j = 0; j < drop.size(); ++j) null.col(static_cast<Index>(j)) = ev.eigenvectors().col(drop[j]);
    if ((kok * null).norm() > 1e-8 * (1.0 + kok.norm())) {
      MatrixXd bmat = kok;
      if (!std::isinf(en)) bmat += v / en;
      return linalg::pinv_symmetric(bmat, rel_cutoff);
    }
  }
  MatrixXd r(v.rows(), static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    r.col(static_cast<Index>(j)) = ev.eigenvectors().col(keep[j]) / std::sqrt(lam(keep[j]));
  const MatrixXd m = linalg::symmetrize(r.transpose() * kok * r);
  Eigen::SelfAdjointEigenSolver<MatrixXd> em(m);
  VectorXd inv = em.eigenvalues();
  const double mtop = inv.cwiseAbs().maxCoeff();
  for (Index j = 0; j < inv.size(); ++j) {
    if (!(inv(j) > rel_cutoff * mtop)) inv(j) = 0.0;
    else inv(j) = std::isinf(en) ? 1.0 / inv(j) : 1.0 / (inv(j) + 1.0 / en);
  }
  const MatrixXd q = r * em.eigenvectors();
  return q * inv.asDiagonal() * q.transpose();
}

}  // namespace

VectorXd a_mmse(const GmmBundle& b, const WeightedEuclidean& omega, const NeighborhoodSpec& spec,
                double rel_cutoff) {
  const Index m = b.V.rows();
  require(b.K_theta.cols() == m && b.K_eta.cols() == m, "a_mmse: inconsistent moment dimension");
  require(omega.dim() == b.K_theta.rows(), "a_mmse: Omega has the wrong dimension");
  const double en = spec.epsilon_n();
  const bool has_eta = b.K_eta.rows() > 0;

  auto constrained = [&](const MatrixXd& b_pinv) -> std::pair<VectorXd, MatrixXd> {
    // Returns (first term, C^{-1} K_eta B^dagger) for the constraint block.
    const MatrixXd c = b.K_eta * b_pinv * b.K_eta.transpose();
    Eigen::FullPivLU<MatrixXd> lu(c);
    if (!lu.isInvertible() || linalg::rcond_symmetric(c) < 1e-12)
      throw NumericalError("a_mmse: eta not identified (K_eta B^dagger K_eta' is singular)");
    VectorXd first = -b_pinv * b.K_eta.transpose() * lu.solve(b.grad_eta_delta);
    MatrixXd proj = lu.solve(b.K_eta * b_pinv);
    return {first, proj};
  };

  if (en == 0.0) {
    if (!has_eta) return VectorXd::Zero(m);
    return constrained(linalg::pinv_symmetric(b.V, rel_cutoff)).first;
  }

  const VectorXd omega_grad = omega.solve(b.grad_theta_delta);
  const MatrixXd kok = b.K_theta.transpose() * omega.solve(b.K_theta);
  const MatrixXd b_pinv = regularized_pinv(kok, b.V, en, rel_cutoff);
  const VectorXd rhs = b.K_theta.transpose() * omega_grad;

  if (!has_eta) return -b_pinv * rhs;
  auto [first, proj] = constrained(b_pinv);
  const VectorXd second = -b_pinv * (rhs - b.K_eta.transpose() * (proj * rhs));
  return first + second;
}

double gmm_bias(const VectorXd& a, const GmmBundle& b, const WeightedEuclidean& omega,
                double epsilon) {
  require(a.size() == b.K_theta.cols(), "gmm_bias: dimension mismatch");
  return std::sqrt(epsilon) * dual_norm_euclidean(b.grad_theta_delta + b.K_theta * a, omega);
}

double gmm_objective(const VectorXd& a, const GmmBundle& b, const WeightedEuclidean& omega,
                     const NeighborhoodSpec& spec) {
  const double bias = gmm_bias(a, b, omega, spec.epsilon);
  return bias * bias + a.dot(b.V * a) / static_cast<double>(spec.n);
}

EstimateReport gmm_estimate(const MomentModel& model, const std::vector<Observation>& data,
                            const NeighborhoodSpec& spec, const VectorXd& preliminary_eta,
                            const GmmEstimateOptions& options) {
  require(!data.empty(), "gmm_estimate: empty data");
  const GmmBundle bundle = options.bundle ? *options.bundle : gmm_bundle(model, data, preliminary_eta);
  const auto& omega = spec.euclidean();
  const VectorXd a = options.a ? *options.a : a_mmse(bundle, omega, spec);
  require(a.size() == model.moment_dim(), "gmm_estimate: a has the wrong dimension");
  const VectorXd theta = model.theta_of_eta(preliminary_eta);
  VectorXd h(static_cast<Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i)
    h(static_cast<Index>(i)) = a.dot(model.psi(data[i], theta));
  const double point = model.delta(theta) + h.mean();
  return make_report("GMM-MMSE", point, gmm_bias(a, bundle, omega, spec.epsilon), sample_sd(h),
                     static_cast<long>(data.size()), spec.epsilon, options.mu, options.p);
}

}  // namespace locrobust
