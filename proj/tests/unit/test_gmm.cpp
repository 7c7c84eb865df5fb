#include <gtest/gtest.h>

#include <cmath>

#include "locrobust/error.hpp"
#include "locrobust/gmm.hpp"
#include "locrobust/numdiff.hpp"
#include "test_models.hpp"

using namespace locrobust;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing_models::LinearIVMoments;
using testing_models::iv_setup;

namespace {

MatrixXd cod_pinv(const MatrixXd& a) { return a.completeOrthogonalDecomposition().pseudoInverse(); }

GmmBundle random_bundle(Rng& rng, Eigen::Index m, Eigen::Index p, Eigen::Index k) {
  GmmBundle b;
  b.V = testing_models::random_spd(m, rng);
  b.K_theta = testing_models::random_matrix(p, m, rng);
  const MatrixXd g = testing_models::random_matrix(k, p, rng);
  b.K_eta = g * b.K_theta;
  b.grad_theta_delta = testing_models::random_matrix(p, 1, rng).col(0);
  b.grad_eta_delta = g * b.grad_theta_delta;
  return b;
}

}  // namespace

TEST(AMmse, EpsilonZeroIsOptimalGmmOneStep) {
  Rng rng(1);
  for (int rep = 0; rep < 5; ++rep) {
    const GmmBundle b = random_bundle(rng, 6, 4, 2);
    const WeightedEuclidean om = WeightedEuclidean::identity(4);
    const VectorXd a = a_mmse(b, om, NeighborhoodSpec(om, 0.0, 100));
    const MatrixXd vp = cod_pinv(b.V);
    const VectorXd expected =
        -vp * b.K_eta.transpose() * (b.K_eta * vp * b.K_eta.transpose()).inverse() * b.grad_eta_delta;
    EXPECT_LT((a - expected).norm(), 1e-10 * (1 + expected.norm()));
  }
}

TEST(AMmse, ScoreMomentsReproduceLikelihoodSolution) {
  Rng rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    const auto m = testing_models::random_gaussian_mean(4, 2, rng);
    const auto sb = compute_bundle(m, VectorXd::Zero(2));
    const auto pb = project(sb);
    const GmmBundle gb = gmm_bundle_from_likelihood(sb);
    const WeightedEuclidean om(testing_models::random_spd(4, rng));
    for (double eps : {0.0, 0.01, 0.5, 1e3}) {
      const NeighborhoodSpec spec(om, eps, 200);
      const VectorXd a = a_mmse(gb, om, spec);
      Rng drng(rep);
      for (int i = 0; i < 5; ++i) {
        const Observation o{m.sample(VectorXd(), sb.theta, drng), VectorXd()};
        const double h = h_mmse(o, m, sb, pb, spec);
        EXPECT_NEAR(a.dot(m.score_theta(o, sb.theta)), h, 1e-8 * (1 + std::abs(h))) << eps;
      }
    }
  }
}

TEST(AMmse, LargeEpsilonApproachesGeneralizedInverseLimit) {
  const auto s = iv_setup(3, 5000, true);
  const GmmBundle b = gmm_bundle(s.moments, s.data, VectorXd());
  Rng rng(9);
  const WeightedEuclidean om(testing_models::random_spd(4, rng));
  const VectorXd a = a_mmse(b, om, NeighborhoodSpec(om, 1e10, 1));
  // -(V^+)^{1/2} [(V^+)^{1/2} K' W K (V^+)^{1/2}]^+ (V^+)^{1/2} K' W grad, with W = Omega^{-1}.
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(b.V);
  const MatrixXd vroot = es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                         es.eigenvectors().transpose();
  const MatrixXd kt = b.K_theta.transpose();  // dim Psi x dim theta
  const MatrixXd w = om.omega().inverse();
  const VectorXd limit =
      -vroot * cod_pinv(vroot * kt * w * kt.transpose() * vroot) * vroot * kt * w * b.grad_theta_delta;
  for (std::size_t i = 0; i < 50; ++i) {
    const VectorXd psi = s.moments.psi(s.data[i], s.moments.theta_of_eta(VectorXd()));
    EXPECT_NEAR(a.dot(psi), limit.dot(psi), 1e-6 * (1 + std::abs(limit.dot(psi))));
  }
}

TEST(AMmse, ConstraintHoldsOnRandomInstances) {
  Rng rng(4);
  for (int rep = 0; rep < 30; ++rep) {
    const Eigen::Index m = 3 + rep % 6, p = 2 + rep % 3, k = 1 + rep % 2;
    const GmmBundle b = random_bundle(rng, m, p, k);
    const WeightedEuclidean om(testing_models::random_spd(p, rng));
    for (double eps : {0.0, 0.1, 10.0}) {
      const VectorXd a = a_mmse(b, om, NeighborhoodSpec(om, eps, 50));
      EXPECT_LE((b.grad_eta_delta + b.K_eta * a).norm(), 1e-8 * (1 + b.grad_eta_delta.norm()));
    }
  }
}

TEST(AMmse, ObjectiveIsMinimal) {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index m = 3 + rep % 6, p = 3, k = 1;
    GmmBundle b = random_bundle(rng, m, p, k);
    const WeightedEuclidean om(testing_models::random_spd(p, rng));
    const NeighborhoodSpec spec(om, 0.05, 100);
    const VectorXd a = a_mmse(b, om, spec);
    const VectorXd a0 = a_mmse(b, om, NeighborhoodSpec(om, 0.0, 100));
    const double best = gmm_objective(a, b, om, spec);
    EXPECT_LE(best, gmm_objective(a0, b, om, spec) + 1e-12);
    const MatrixXd null = Eigen::FullPivLU<MatrixXd>(b.K_eta).kernel();
    for (int j = 0; j < 10; ++j) {
      const VectorXd w = null * testing_models::random_matrix(null.cols(), 1, rng).col(0) * 0.05;
      EXPECT_LE(best, gmm_objective(a + w, b, om, spec) + 1e-12);
    }
    GmmBundle known = b;
    known.K_eta.resize(0, m);
    known.grad_eta_delta.resize(0);
    const VectorXd ak = a_mmse(known, om, spec);
    EXPECT_LE(gmm_objective(ak, known, om, spec), gmm_objective(VectorXd::Zero(m), known, om, spec));
  }
}

TEST(AMmse, PseudoInverseCutoffInsensitivity) {
  const auto s = iv_setup(6, 2000);
  const GmmBundle b = gmm_bundle(s.moments, s.data, s.eta);
  const WeightedEuclidean om = WeightedEuclidean::identity(4);
  const NeighborhoodSpec spec(om, 0.02, 2000);
  const VectorXd a1 = a_mmse(b, om, spec, 1e-10);
  const VectorXd a2 = a_mmse(b, om, spec, 1e-9);
  const VectorXd a3 = a_mmse(b, om, spec, 1e-11);
  const VectorXd theta = s.moments.theta_of_eta(s.eta);
  VectorXd mean_psi = VectorXd::Zero(5);
  for (const auto& o : s.data) mean_psi += s.moments.psi(o, theta);
  mean_psi /= static_cast<double>(s.data.size());
  EXPECT_LT(std::abs((a1 - a2).dot(mean_psi)), 1e-6);
  EXPECT_LT(std::abs((a1 - a3).dot(mean_psi)), 1e-6);
}

TEST(AMmse, UnidentifiedEtaIsReported) {
  Rng rng(7);
  GmmBundle b = random_bundle(rng, 4, 3, 1);
  b.K_eta.setZero();
  const WeightedEuclidean om = WeightedEuclidean::identity(3);
  EXPECT_THROW(a_mmse(b, om, NeighborhoodSpec(om, 0.1, 10)), NumericalError);
}

TEST(GmmBias, Cases) {
  Rng rng(8);
  GmmBundle b = random_bundle(rng, 3, 3, 0);
  const WeightedEuclidean om(testing_models::random_spd(3, rng));
  const VectorXd solve = -b.K_theta.inverse() * b.grad_theta_delta;  // K_theta a = -grad
  EXPECT_NEAR(gmm_bias(solve, b, om, 0.3), 0.0, 1e-10);
  EXPECT_NEAR(gmm_bias(VectorXd::Zero(3), b, om, 0.3),
              std::sqrt(0.3) * dual_norm_euclidean(b.grad_theta_delta, om), 1e-14);
  EXPECT_THROW(gmm_bias(VectorXd::Zero(2), b, om, 0.3), ValidationError);
}

TEST(GmmBias, IvFiniteEpsilonLiesBetweenEndpoints) {
  const auto s = iv_setup(10, 3000);
  const GmmBundle b = gmm_bundle(s.moments, s.data, s.eta);
  const WeightedEuclidean om = WeightedEuclidean::identity(4);
  const double eps = 0.01;
  const double b0 = gmm_bias(VectorXd::Zero(5), b, om, eps);
  const double bmid = gmm_bias(a_mmse(b, om, NeighborhoodSpec(om, eps, 3000)), b, om, eps);
  const double binf = gmm_bias(a_mmse(b, om, NeighborhoodSpec(om, 1e10, 1)), b, om, eps);
  EXPECT_GT(b0, bmid);
  EXPECT_GT(bmid, binf);
}

TEST(GmmBundle, MomentsAreCenteredUnderReferenceData) {
  const auto s = iv_setup(11, 200000);
  const VectorXd theta = s.moments.theta_of_eta(s.eta);
  MatrixXd psi(5, static_cast<Eigen::Index>(s.data.size()));
  for (std::size_t i = 0; i < s.data.size(); ++i) psi.col(static_cast<Eigen::Index>(i)) = s.moments.psi(s.data[i], theta);
  const VectorXd mean = psi.rowwise().mean();
  for (Eigen::Index j = 0; j < 5; ++j) {
    const double sd = std::sqrt((psi.row(j).array() - mean(j)).square().mean());
    EXPECT_LT(std::abs(mean(j)), 4.0 * sd / std::sqrt(double(s.data.size())));
  }
  const GmmBundle b = gmm_bundle(s.moments, s.data, s.eta);
  EXPECT_LT((b.V - b.V.transpose()).norm(), 1e-14);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatrixXd>(b.V).eigenvalues().minCoeff(), 0.0);
}

TEST(GmmBundle, AnalyticJacobianMatchesFiniteDifferences) {
  const auto s = iv_setup(12, 10);
  const VectorXd theta = (VectorXd(4) << 0.3, -0.1, 0.2, 0.5).finished();
  for (const auto& o : s.data) {
    const MatrixXd fd = numdiff::jacobian_t([&](const VectorXd& t) { return s.moments.psi(o, t); }, theta);
    EXPECT_LT((s.moments.psi_jacobian(o, theta) - fd).norm(), 1e-7 * (1 + fd.norm()));
  }
}

TEST(GmmEstimate, ZeroCoefficientsGivePlugIn) {
  const auto s = iv_setup(13, 300);
  const WeightedEuclidean om = WeightedEuclidean::identity(4);
  GmmEstimateOptions opts;
  opts.a = VectorXd::Zero(5);
  const auto r = gmm_estimate(s.moments, s.data, NeighborhoodSpec(om, 0.1, 300), s.eta, opts);
  EXPECT_EQ(r.point, s.moments.delta(s.moments.theta_of_eta(s.eta)));
}

TEST(GmmEstimate, ScalarScoreMomentMatchesParametricEngine) {
  const testing_models::GaussianLocation lik;
  const testing_models::LocationScoreMoment mom;
  Rng rng(14);
  std::normal_distribution<double> z;
  std::vector<Observation> data;
  for (int i = 0; i < 300; ++i) data.push_back({VectorXd::Constant(1, 1.0 + z(rng)), VectorXd()});
  const VectorXd eta = VectorXd::Constant(1, 0.8);
  const WeightedEuclidean om = WeightedEuclidean::identity(1);
  const NeighborhoodSpec spec(om, 0.05, 300);
  const auto g = gmm_estimate(mom, data, spec, eta);
  const auto p = estimate(lik, data, spec, eta);
  EXPECT_NEAR(g.point, p.point, 1e-8);
  EXPECT_NEAR(g.sd_h, p.sd_h, 1e-8);
}

TEST(GmmEstimate, CenteredUnderReferenceData) {
  Rng rng(15);
  MatrixXd pi = testing_models::random_matrix(1, 2, rng);
  const models::LinearIVModel model(pi, MatrixXd::Constant(1, 1, 0.6), MatrixXd::Identity(2, 2), 1.0,
                                    VectorXd::Ones(1));
  const LinearIVMoments mom(pi, model.c());
  const VectorXd eta0 = VectorXd::Constant(1, 0.5);
  const int reps = 400;
  VectorXd est(reps);
  for (int r = 0; r < reps; ++r) {
    const auto data = testing_models::simulate_iv(model, model.theta_of_eta(eta0), 500, 1000 + r);
    const VectorXd prelim = models::ols(data, 1);
    const WeightedEuclidean om = WeightedEuclidean::identity(2);
    est(r) = gmm_estimate(mom, data, NeighborhoodSpec(om, 0.0, 500), prelim).point;
  }
  EXPECT_LT(std::abs(est.mean() - 0.5), 3.0 * sample_sd(est) / std::sqrt(double(reps)));
}

class GmmInvariants : public ::testing::TestWithParam<int> {};

TEST_P(GmmInvariants, ReferenceMeanIsZero) {
  const auto s = iv_setup(40 + GetParam(), 2000);
  const GmmBundle b = gmm_bundle(s.moments, s.data, s.eta);
  const WeightedEuclidean om = WeightedEuclidean::identity(4);
  const VectorXd a = a_mmse(b, om, NeighborhoodSpec(om, 0.05, 2000));
  const auto draws = testing_models::simulate_iv(s.model, s.model.theta_of_eta(s.eta), 1000000, 77 + GetParam());
  const VectorXd theta = s.moments.theta_of_eta(s.eta);
  VectorXd h(static_cast<Eigen::Index>(draws.size()));
  for (std::size_t i = 0; i < draws.size(); ++i) h(static_cast<Eigen::Index>(i)) = a.dot(s.moments.psi(draws[i], theta));
  EXPECT_LE(std::abs(h.mean()), 4.0 * sample_sd(h) / std::sqrt(double(h.size())));
}

TEST_P(GmmInvariants, LocalRobustnessByFiniteDifferences) {
  const auto s = iv_setup(50 + GetParam(), 2000);
  Rng orng(GetParam());
  const WeightedEuclidean om(testing_models::random_spd(4, orng));
  const VectorXd theta0 = s.moments.theta_of_eta(s.eta);
  for (double eps : {0.0, 0.05}) {
    const NeighborhoodSpec spec(om, eps, 2000);
    // Psi is linear in theta, so E_{theta0} Psi(theta) = K_theta'(theta - theta0) exactly.
    auto total = [&](const VectorXd& eta) {
      const GmmBundle b = gmm_bundle(s.moments, s.data, eta);
      const VectorXd a = a_mmse(b, om, spec);
      const VectorXd theta = s.moments.theta_of_eta(eta);
      return s.moments.delta(theta) + a.dot(b.K_theta.transpose() * (theta - theta0));
    };
    EXPECT_LT(numdiff::gradient(total, s.eta).norm(), 1e-3);
  }
}

TEST_P(GmmInvariants, JointScalingOfOmegaAndEpsilon) {
  Rng rng(60 + GetParam());
  const GmmBundle b = random_bundle(rng, 6, 4, 2);
  const MatrixXd omega = testing_models::random_spd(4, rng);
  const VectorXd psi = testing_models::random_matrix(6, 1, rng).col(0);
  const double base = a_mmse(b, WeightedEuclidean(omega), NeighborhoodSpec(WeightedEuclidean(omega), 0.2, 40)).dot(psi);
  for (double c : {0.1, 10.0}) {
    const WeightedEuclidean om(c * omega);
    EXPECT_NEAR(a_mmse(b, om, NeighborhoodSpec(om, 0.2 * c, 40)).dot(psi), base, 1e-10 * (1 + std::abs(base)));
  }
}

INSTANTIATE_TEST_SUITE_P(Instances, GmmInvariants, ::testing::Range(0, 3));
