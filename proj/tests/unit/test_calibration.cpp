#include <gtest/gtest.h>

#include <cmath>

#include "locrobust/calibration.hpp"
#include "locrobust/error.hpp"
#include "locrobust/models/linear_iv.hpp"
#include "locrobust/normal.hpp"
#include "test_models.hpp"

using namespace locrobust;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(EpsilonSemiparam, KnownParameterValues) {
  EXPECT_NEAR(epsilon_semiparam(0.01, 500, 1.0).epsilon, 0.04330, 1e-4);
  EXPECT_NEAR(epsilon_semiparam(1e-10, 500, 1.0).epsilon, 0.32373, 1e-3);
  EXPECT_NEAR(epsilon_semiparam(0.01, 500, 1.0).epsilon, 0.043295155448434728739, 1e-14);
  EXPECT_NEAR(epsilon_semiparam(1e-10, 500, 1.0).epsilon, 0.32373326461279081702, 1e-13);
  EXPECT_EQ(epsilon_semiparam(0.5, 500, 1.0).epsilon, 0.0);
  EXPECT_THROW(epsilon_semiparam(0.01, 500, 0.0), ValidationError);
  EXPECT_THROW(epsilon_semiparam(0.0, 500, 1.0), ValidationError);
}

TEST(EpsilonSemiparam, StrictlyDecreasingInP) {
  const double ps[] = {1e-10, 1e-5, 0.01, 0.1, 0.4};
  for (int i = 0; i + 1 < 5; ++i)
    EXPECT_GT(epsilon_semiparam(ps[i], 500, 1.0).epsilon, epsilon_semiparam(ps[i + 1], 500, 1.0).epsilon);
  EXPECT_NEAR(epsilon_semiparam(0.01, 500, 0.5).epsilon, 2.0 * epsilon_semiparam(0.01, 500, 1.0).epsilon,
              1e-15);
}

namespace {

models::LinearIVModel iv_model(const MatrixXd& pi) {
  const Eigen::Index k = pi.rows(), m = pi.cols();
  MatrixXd sv(k, k), sz(m, m);
  sv = 0.5 * MatrixXd::Identity(k, k);
  sv(0, k - 1) = sv(k - 1, 0) = k > 1 ? 0.1 : sv(0, 0);
  sz = MatrixXd::Identity(m, m);
  if (m > 1) sz(0, 1) = sz(1, 0) = 0.3;
  return models::LinearIVModel(pi, sv, sz, 1.7, VectorXd::Ones(k));
}

}  // namespace

TEST(EpsilonParametric, LinearModelMatchesBlockFormula) {
  MatrixXd pi(2, 3);
  pi << 1.0, 0.4, -0.2, 0.3, 0.8, 0.5;
  const auto model = iv_model(pi);
  const VectorXd eta = (VectorXd(2) << 0.5, -1.0).finished();
  const auto bundle = compute_bundle(model, eta);
  const auto projected = project(bundle);
  Rng rng(4);
  const MatrixXd full_omega = testing_models::random_spd(4, rng);
  // Only the rho-block of Omega matters once H_tilde is block-diagonal in (beta, rho).
  MatrixXd omega = MatrixXd::Zero(4, 4);
  omega.topLeftCorner(2, 2) = full_omega.topLeftCorner(2, 2);
  omega.bottomRightCorner(2, 2) = full_omega.bottomRightCorner(2, 2);
  const WeightedEuclidean om(omega);
  for (double p : {0.01, 1e-10, 0.2}) {
    const double a = epsilon_parametric(p, 500, projected, om).epsilon;
    const double b = models::epsilon_linear(p, 500, model, omega.bottomRightCorner(2, 2));
    EXPECT_NEAR(a / b, 1.0, 1e-8) << p;
  }
  EXPECT_EQ(epsilon_parametric(0.5, 500, projected, om).epsilon, 0.0);
}

TEST(EpsilonParametric, ZeroFirstStageIsUnbounded) {
  const auto model = iv_model(MatrixXd::Zero(1, 2));
  const auto projected = project(compute_bundle(model, VectorXd::Zero(1)));
  EXPECT_THROW(epsilon_parametric(0.01, 500, projected, WeightedEuclidean::identity(2)),
               UnboundedEpsilonError);
}

TEST(EpsilonParametric, ScalesWithOmega) {
  Rng rng(8);
  const auto model = testing_models::random_gaussian_mean(4, 2, rng);
  const auto projected = project(compute_bundle(model, VectorXd::Zero(2)));
  const MatrixXd omega = testing_models::random_spd(4, rng);
  const double base = epsilon_parametric(0.01, 300, projected, WeightedEuclidean(omega)).epsilon;
  for (double c : {0.1, 7.0})
    EXPECT_NEAR(epsilon_parametric(0.01, 300, projected, WeightedEuclidean(c * omega)).epsilon,
                c * base, 1e-10 * c * base);
}

TEST(DetectionError, IdenticalModelsGiveOneHalf) {
  const testing_models::GaussianLocation model(true, 0.0);
  const auto r = detection_error_mc(model, VectorXd::Zero(1), VectorXd(), 50, 2000, 3);
  EXPECT_NEAR(r.estimate, 0.5, 1e-12);
}

TEST(DetectionError, BoundaryPointHasCalibratedError) {
  const testing_models::GaussianLocation model(true, 0.0);
  const long n = 500;
  const auto projected = project(compute_bundle(model, VectorXd()));
  const double eps = epsilon_parametric(0.01, n, projected, WeightedEuclidean::identity(1)).epsilon;
  // Normal-approximation identity: e = Phi(-sqrt(n eps) / 2) at distance sqrt(eps).
  EXPECT_NEAR(norm_cdf(-std::sqrt(n * eps) / 2.0), 0.01, 1e-12);
  const auto r = detection_error_mc(model, VectorXd::Constant(1, std::sqrt(eps)), VectorXd(), n, 20000, 11);
  EXPECT_NEAR(r.estimate, 0.01, 3.0 * r.standard_error);
}

TEST(DetectionError, DistantModelsAreAlwaysDetected) {
  const testing_models::GaussianLocation model(true, 0.0);
  const auto r = detection_error_mc(model, VectorXd::Constant(1, 2.0), VectorXd(), 100, 1000, 5);
  EXPECT_LT(r.estimate, 1e-6);
}

TEST(DetectionError, ThreadCountDoesNotChangeEstimate) {
  const testing_models::GaussianLocation model(true, 0.0);
  const auto a = detection_error_mc(model, VectorXd::Constant(1, 0.1), VectorXd(), 200, 500, 9, {}, 1);
  const auto b = detection_error_mc(model, VectorXd::Constant(1, 0.1), VectorXd(), 200, 500, 9, {}, 3);
  EXPECT_EQ(a.estimate, b.estimate);
}
