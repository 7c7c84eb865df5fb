#include "locrobust/numdiff.hpp"

namespace locrobust::numdiff {

Eigen::VectorXd gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                         const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step(x(i));
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd jacobian_t(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jt(x.size(), f0.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step(x(i));
    xp(i) = x(i) + h;
    const Eigen::VectorXd fp = f(xp);
    xp(i) = x(i) - h;
    const Eigen::VectorXd fm = f(xp);
    xp(i) = x(i);
    jt.row(i) = ((fp - fm) / (2.0 * h)).transpose();
  }
  return jt;
}

}  // namespace locrobust::numdiff
