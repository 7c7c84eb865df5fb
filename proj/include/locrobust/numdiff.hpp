#pragma once

#include <Eigen/Dense>
#include <functional>

namespace locrobust::numdiff {

/// Central-difference step for coordinate value x.
inline double step(double x) { return 1e-5 * (1.0 + (x < 0 ? -x : x)); }

Eigen::VectorXd gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                         const Eigen::VectorXd& x);

/// Returns the dim(x) x dim(f) matrix of partials d f_j / d x_i (gradient layout).
Eigen::MatrixXd jacobian_t(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x);

}  // namespace locrobust::numdiff
