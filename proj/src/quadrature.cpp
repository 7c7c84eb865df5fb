#include "locrobust/quadrature.hpp"

#include <cmath>

#include "locrobust/error.hpp"

namespace locrobust {

// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
GaussHermite gauss_hermite_normal(int n) {
  require(n >= 1, "gauss_hermite_normal: need at least one node");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  GaussHermite rule;
  rule.nodes = es.eigenvalues();
  rule.weights = es.eigenvectors().row(0).transpose().array().square();
  rule.weights /= rule.weights.sum();
  return rule;
}

}  // namespace locrobust
