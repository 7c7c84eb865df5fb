#include "locrobust/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace locrobust::linalg {

MatrixXd pinv(const MatrixXd& a, double rel_cutoff) {
  if (a.size() == 0) return MatrixXd::Zero(a.cols(), a.rows());
  Eigen::BDCSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  const double tol = rel_cutoff * (s.size() > 0 ? s(0) : 0.0);
  VectorXd inv = VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol && s(i) > 0.0) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

MatrixXd pinv_symmetric(const MatrixXd& a, double rel_cutoff) {
  if (a.size() == 0) return a;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(a));
  const VectorXd& ev = es.eigenvalues();
  const double tol = rel_cutoff * ev.cwiseAbs().maxCoeff();
  VectorXd inv = VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) > tol && ev(i) != 0.0) inv(i) = 1.0 / ev(i);
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

double asymmetry(const MatrixXd& a) {
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

MatrixXd symmetrize(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

double lambda_max_symmetric(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double rcond_symmetric(const MatrixXd& a) {
  if (a.size() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(a), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (hi <= 0.0 || lo <= 0.0) return 0.0;
  return lo / hi;
}

MatrixXd solve_psd(const MatrixXd& a, const MatrixXd& b, double rel_cutoff) {
  Eigen::LLT<MatrixXd> llt(symmetrize(a));
  if (llt.info() == Eigen::Success && llt.rcond() > rel_cutoff) return llt.solve(b);
  return pinv_symmetric(a, rel_cutoff) * b;
}

VectorXd solve_psd(const MatrixXd& a, const VectorXd& b, double rel_cutoff) {
  return solve_psd(a, MatrixXd(b), rel_cutoff).col(0);
}

}  // namespace locrobust::linalg
