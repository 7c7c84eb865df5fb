#include "locrobust/models/linear_iv.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "locrobust/error.hpp"
#include "locrobust/linalg.hpp"
#include "locrobust/normal.hpp"

namespace locrobust::models {

LinearIVModel::LinearIVModel(MatrixXd pi, MatrixXd sigma_v, MatrixXd sigma_z, double sigma2,
                             VectorXd c)
    : pi_(std::move(pi)),
      sigma_v_(std::move(sigma_v)),
      sigma_z_(std::move(sigma_z)),
      sigma2_(sigma2),
      c_(std::move(c)),
      k_(pi_.rows()) {
  require(k_ > 0, "LinearIVModel: x must have at least one component");
  require(sigma_v_.rows() == k_ && sigma_v_.cols() == k_, "LinearIVModel: Sigma_V must be k x k");
  require(sigma_z_.rows() == pi_.cols() && sigma_z_.cols() == pi_.cols(),
          "LinearIVModel: Sigma_Z must match the columns of Pi");
  require(c_.size() == k_, "LinearIVModel: c must have dim beta entries");
  require(sigma2_ > 0.0, "LinearIVModel: sigma2 must be positive");
  chol_v_.compute(sigma_v_);
  require(chol_v_.info() == Eigen::Success, "LinearIVModel: Sigma_V must be positive definite");
  if (sigma_z_.size() > 0) {
    chol_z_.compute(sigma_z_);
    require(chol_z_.info() == Eigen::Success, "LinearIVModel: Sigma_Z must be positive definite");
  }
  require(Eigen::LLT<MatrixXd>(sigma_x()).info() == Eigen::Success,
          "LinearIVModel: Sigma_X must be positive definite");
}

Observation LinearIVModel::make_observation(double y, const VectorXd& x, const VectorXd& z) const {
  Observation obs;
  obs.y.resize(1 + k_);
  obs.y(0) = y;
  obs.y.tail(k_) = x;
  obs.x = z;
  return obs;
}

VectorXd LinearIVModel::theta_of_eta(const VectorXd& eta) const {
  VectorXd theta = VectorXd::Zero(2 * k_);
  theta.head(k_) = eta;
  return theta;
}

double LinearIVModel::log_density(const Observation& obs, const VectorXd& theta) const {
  const VectorXd x = obs.y.tail(k_);
  const VectorXd v = x - pi_ * obs.x;
  const double r = obs.y(0) - x.dot(theta.head(k_)) - v.dot(theta.tail(k_));
  const double log_xi = -0.5 * r * r / sigma2_ - 0.5 * std::log(2.0 * std::numbers::pi * sigma2_);
  const VectorXd lv = chol_v_.matrixL().solve(v);
  const double log_det_v = 2.0 * chol_v_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_v = -0.5 * lv.squaredNorm() - 0.5 * log_det_v -
                       0.5 * static_cast<double>(k_) * std::log(2.0 * std::numbers::pi);
  return log_xi + log_v;
}

VectorXd LinearIVModel::score_theta(const Observation& obs, const VectorXd& theta) const {
  const VectorXd x = obs.y.tail(k_);
  const VectorXd v = x - pi_ * obs.x;
  const double r = obs.y(0) - x.dot(theta.head(k_)) - v.dot(theta.tail(k_));
  VectorXd s(2 * k_);
  s.head(k_) = x * r / sigma2_;
  s.tail(k_) = v * r / sigma2_;
  return s;
}

MatrixXd LinearIVModel::eta_jacobian(const VectorXd&) const {
  MatrixXd g = MatrixXd::Zero(k_, 2 * k_);
  g.leftCols(k_).setIdentity();
  return g;
}

VectorXd LinearIVModel::grad_delta(const VectorXd&) const {
  VectorXd g = VectorXd::Zero(2 * k_);
  g.head(k_) = c_;
  return g;
}

std::optional<MatrixXd> LinearIVModel::information(const VectorXd& z, const VectorXd&) const {
  const MatrixXd xx = z.size() == 0 ? sigma_x()
                                    : MatrixXd(pi_ * z * z.transpose() * pi_.transpose() + sigma_v_);
  MatrixXd h(2 * k_, 2 * k_);
  h.topLeftCorner(k_, k_) = xx;
  h.topRightCorner(k_, k_) = sigma_v_;
  h.bottomLeftCorner(k_, k_) = sigma_v_;
  h.bottomRightCorner(k_, k_) = sigma_v_;
  return h / sigma2_;
}

VectorXd LinearIVModel::draw_z(Rng& rng) const {
  std::normal_distribution<double> normal;
  VectorXd e(pi_.cols());
  for (Index i = 0; i < e.size(); ++i) e(i) = normal(rng);
  return chol_z_.matrixL() * e;
}

VectorXd LinearIVModel::sample(const VectorXd& z, const VectorXd& theta, Rng& rng) const {
  std::normal_distribution<double> normal;
  VectorXd e(k_);
  for (Index i = 0; i < k_; ++i) e(i) = normal(rng);
  const VectorXd v = chol_v_.matrixL() * e;
  const VectorXd x = pi_ * z + v;
  const double y = x.dot(theta.head(k_)) + v.dot(theta.tail(k_)) + std::sqrt(sigma2_) * normal(rng);
  VectorXd out(1 + k_);
  out(0) = y;
  out.tail(k_) = x;
  return out;
}

double h_linear(double y, const VectorXd& x, const VectorXd& z, const VectorXd& beta,
                const LinearIVModel& model, double epsilon_n, const MatrixXd& omega_rho) {
  require(epsilon_n >= 0.0, "h_linear: eps * n must be >= 0");
  const double r = y - x.dot(beta);
  const Eigen::LLT<MatrixXd> sx(model.sigma_x());
  const VectorXd sx_c = sx.solve(model.c());
  const double ols_part = r * x.dot(sx_c);
  if (epsilon_n == 0.0) return ols_part;
  const MatrixXd& sv = model.sigma_v();
  const MatrixXd proj = sv - sv * sx.solve(sv);
  const VectorXd w = (x - model.pi() * z) - sv * sx.solve(x);
  const VectorXd rhs = sv * sx_c;
  VectorXd solved;
  if (std::isinf(epsilon_n)) {
    solved = linalg::pinv_symmetric(proj) * rhs;
  } else {
    solved = linalg::solve_psd(proj + model.sigma2() * omega_rho / epsilon_n, rhs);
  }
  return ols_part - r * w.dot(solved);
}

double h_linear_iv_limit(double y, const VectorXd& x, const VectorXd& z, const VectorXd& beta,
                         const LinearIVModel& model) {
  const MatrixXd first_stage = model.pi() * model.sigma_z() * model.pi().transpose();
  const VectorXd coef = linalg::pinv_symmetric(first_stage) * model.c();
  return (y - x.dot(beta)) * (model.pi() * z).dot(coef);
}

double epsilon_linear(double p, long n, const LinearIVModel& model, const MatrixXd& omega_rho) {
  require(p > 0.0 && p < 1.0, "epsilon_linear: p must lie in (0, 1)");
  require(n >= 1, "epsilon_linear: n must be >= 1");
  const WeightedEuclidean w(omega_rho);
  const MatrixXd& sv = model.sigma_v();
  const MatrixXd proj = sv - sv * Eigen::LLT<MatrixXd>(model.sigma_x()).solve(sv);
  const auto l = w.cholesky_lower();
  const auto tri = l.triangularView<Eigen::Lower>();
  const MatrixXd half = tri.solve(proj);
  const double lambda = linalg::lambda_max_symmetric(tri.solve(half.transpose()));
  if (!(lambda > 1e-14)) throw UnboundedEpsilonError();
  const double q = norm_quantile(p);
  return 4.0 * model.sigma2() * q * q / (static_cast<double>(n) * lambda);
}

VectorXd ols(const std::vector<Observation>& data, Index k) {
  require(!data.empty(), "ols: empty data");
  MatrixXd xx = MatrixXd::Zero(k, k);
  VectorXd xy = VectorXd::Zero(k);
  for (const auto& obs : data) {
    const VectorXd x = obs.y.tail(k);
    xx.noalias() += x * x.transpose();
    xy += x * obs.y(0);
  }
  return xx.ldlt().solve(xy);
}

namespace {

struct Moments {
  MatrixXd zz, xz, xx;
  VectorXd zy, xy;
};

Moments moments(const std::vector<Observation>& data, Index k) {
  require(!data.empty(), "linear model: empty data");
  const Index m = data.front().x.size();
  Moments mo{MatrixXd::Zero(m, m), MatrixXd::Zero(k, m), MatrixXd::Zero(k, k), VectorXd::Zero(m),
             VectorXd::Zero(k)};
  for (const auto& obs : data) {
    require(obs.y.size() == k + 1 && obs.x.size() == m, "linear model: ragged observations");
    const VectorXd x = obs.y.tail(k);
    mo.zz.noalias() += obs.x * obs.x.transpose();
    mo.xz.noalias() += x * obs.x.transpose();
    mo.xx.noalias() += x * x.transpose();
    mo.zy += obs.x * obs.y(0);
    mo.xy += x * obs.y(0);
  }
  const double n = static_cast<double>(data.size());
  mo.zz /= n;
  mo.xz /= n;
  mo.xx /= n;
  mo.zy /= n;
  mo.xy /= n;
  return mo;
}

}  // namespace

VectorXd two_stage_least_squares(const std::vector<Observation>& data, Index k) {
  const Moments mo = moments(data, k);
  Eigen::LLT<MatrixXd> zz(mo.zz);
  require(zz.info() == Eigen::Success, "2SLS: instrument second moment is singular");
  const MatrixXd a = mo.xz * zz.solve(mo.xz.transpose());
  const VectorXd b = mo.xz * zz.solve(mo.zy);
  Eigen::LLT<MatrixXd> la(a);
  require(la.info() == Eigen::Success, "2SLS: instruments do not identify beta");
  return la.solve(b);
}

LinearIVModel fit_linear_iv(const std::vector<Observation>& data, Index k, VectorXd c) {
  const Moments mo = moments(data, k);
  Eigen::LLT<MatrixXd> zz(mo.zz);
  require(zz.info() == Eigen::Success, "fit_linear_iv: instrument second moment is singular");
  const MatrixXd pi = zz.solve(mo.xz.transpose()).transpose();
  const MatrixXd sigma_v = mo.xx - pi * mo.zz * pi.transpose();
  const VectorXd beta = ols(data, k);
  double ssr = 0.0;
  for (const auto& obs : data) {
    const double r = obs.y(0) - obs.y.tail(k).dot(beta);
    ssr += r * r;
  }
  const double sigma2 = ssr / static_cast<double>(data.size());
  return LinearIVModel(pi, linalg::symmetrize(sigma_v), mo.zz, sigma2, std::move(c));
}

}  // namespace locrobust::models
