#pragma once

#include <Eigen/Dense>

namespace locrobust {

/// Gauss-Hermite rule for expectations under N(0,1): E f(Z) ~ sum w_k f(z_k).
struct GaussHermite {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;  // sums to one
};

GaussHermite gauss_hermite_normal(int n);

}  // namespace locrobust
