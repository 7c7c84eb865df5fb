#include <gtest/gtest.h>

#include <cmath>

#include "locrobust/error.hpp"
#include "locrobust/inference.hpp"
#include "test_models.hpp"

using namespace locrobust;
using Eigen::VectorXd;

namespace {

double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// (1 - mu) quantile of |N(1, s^2)| by plain bisection on [0, 1 + 40 s].
double folded_quantile(double s, double mu) {
  double lo = 0.0, hi = 1.0 + 40.0 * s;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = phi((mid - 1.0) / s) - phi((-mid - 1.0) / s);
    (cdf < 1.0 - mu ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(WorstCaseBias, PlugInEstimatorHasDualNormBias) {
  const VectorXd g = (VectorXd(2) << 3, 4).finished();
  EXPECT_NEAR(worst_case_bias(g, VectorXd::Zero(2), WeightedEuclidean::identity(2), 0.04), 1.0, 1e-15);
  EXPECT_NEAR(worst_case_bias(g, g, WeightedEuclidean::identity(2), 0.04), 0.0, 1e-15);
  EXPECT_THROW(worst_case_bias(g, VectorXd::Zero(3), WeightedEuclidean::identity(2), 1.0),
               ValidationError);
}

TEST(WorstCaseBias, KLFormIsScaledStandardDeviation) {
  const VectorXd q = (VectorXd(4) << 1, 2, 3, 4).finished();
  const VectorXd w = VectorXd::Constant(4, 0.25);
  EXPECT_NEAR(worst_case_bias_kl(q, w, 0.09), 0.3 * std::sqrt(1.25), 1e-15);
}

TEST(ConfidenceInterval, WaldAndBiasExamples) {
  const auto wald = confidence_interval(2.0, 0.0, 1.0, 100, 0.05);
  EXPECT_NEAR(wald.hi - 2.0, 0.19600, 1e-5);
  EXPECT_NEAR(2.0 - wald.lo, 0.19600, 1e-5);
  const auto pure = confidence_interval(-1.0, 0.3, 0.0, 100, 0.05);
  EXPECT_DOUBLE_EQ(pure.hi, -0.7);
  EXPECT_DOUBLE_EQ(pure.lo, -1.3);
  const auto both = confidence_interval(0.0, 0.01, 1.0, 100, 0.05);
  EXPECT_NEAR(both.hi, 0.20600, 1e-5);
  EXPECT_THROW(confidence_interval(0, 0, 1, 10, 1.5), ValidationError);
}

TEST(ConfidenceIntervalAK, DegenerateAndLimitCases) {
  const auto deg = confidence_interval_ak(1.0, 0.2, 0.0, 100, 0.05);
  EXPECT_NEAR(deg.width() / 2.0, 0.2, 1e-12);
  const auto tiny = confidence_interval_ak(1.0, 0.2, 1e-9, 100, 0.05);
  EXPECT_NEAR(tiny.width() / 2.0, 0.2, 1e-9);
  // b large relative to se = sd/sqrt(n): the folded-normal critical value is
  // b/se + z_{1-mu} up to terms of order Phi(-2b/se), so the width ratio is
  // (b + z_{1-mu} se) / (b + z_{1-mu/2} se).
  const double b = 10.0, sd = 1.0;
  const long n = 100;
  const double se = sd / std::sqrt(double(n));
  const double z1 = 1.6448536269514727, z2 = 1.959963984540054;
  const auto ak = confidence_interval_ak(0.0, b, sd, n, 0.05);
  const auto st = confidence_interval(0.0, b, sd, n, 0.05);
  const double ratio = ak.width() / st.width();
  EXPECT_LT(ratio, 1.0);
  EXPECT_NEAR(ratio, (b + z1 * se) / (b + z2 * se), 1e-9);
  EXPECT_EQ(confidence_interval_ak(0.0, 0.0, 1.0, 100, 0.05).width(),
            confidence_interval(0.0, 0.0, 1.0, 100, 0.05).width());
}

TEST(ConfidenceIntervalAK, MatchesFoldedNormalOracle) {
  const long n = 400;
  const double sd = 2.0;
  const double b = sd / std::sqrt(double(n));
  const auto ak = confidence_interval_ak(0.0, b, sd, n, 0.05);
  const double half = ak.width() / 2.0;
  EXPECT_GT(half, b);
  EXPECT_LT(half, b + 1.959963984540054 * sd / std::sqrt(double(n)));
  EXPECT_NEAR(half, b * folded_quantile(1.0, 0.05), 1e-8);
  for (double s : {0.05, 0.3, 2.0, 9.0})
    EXPECT_NEAR(confidence_interval_ak(0.0, 1.0, s * 10.0, 100, 0.1).width() / 2.0,
                folded_quantile(s, 0.1), 1e-8);
}

TEST(ConfidenceIntervalAK, NeverWiderThanRobustInterval) {
  Rng rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    const double b = std::exp(8.0 * u(rng) - 6.0);
    const double sd = std::exp(6.0 * u(rng) - 3.0);
    const long n = 1 + static_cast<long>(2000 * u(rng));
    const double mu = 0.01 + 0.3 * u(rng);
    const auto robust = confidence_interval(0.5, b, sd, n, mu);
    const auto ak = confidence_interval_ak(0.5, b, sd, n, mu);
    EXPECT_TRUE(robust.contains(ak)) << b << " " << sd << " " << n << " " << mu;
  }
}

TEST(EstimateReport, IntervalsNestAroundPoint) {
  const auto r = make_report("x", 1.5, 0.05, 0.8, 250, 0.01, 0.05, 0.01);
  EXPECT_TRUE(r.ci_robust.contains(r.ci_nonrobust));
  EXPECT_TRUE(r.ci_nonrobust.contains(r.point));
  EXPECT_GT(r.ci_nonrobust.width(), 0.0);
  const auto z = make_report("z", 1.5, 0.0, 0.0, 250, 0.0, 0.05);
  EXPECT_EQ(z.ci_robust.width(), 0.0);
}

TEST(EstimateReport, RobustWidthNondecreasingInEpsilonForFixedInfluence) {
  // Plug-in of a fixed h: bias grows as sqrt(eps) times a constant dual norm.
  double last = 0.0;
  for (double eps : {0.0, 1e-4, 1e-3, 0.01, 0.1, 1.0}) {
    const double b = worst_case_bias((VectorXd(2) << 1, -2).finished(), VectorXd::Zero(2),
                                     WeightedEuclidean::identity(2), eps);
    const double w = confidence_interval(0.0, b, 1.0, 500, 0.05).width();
    EXPECT_GE(w, last);
    last = w;
  }
}

TEST(SampleSd, UsesUnbiasedDenominator) {
  EXPECT_NEAR(sample_sd((VectorXd(3) << 1, 2, 3).finished()), 1.0, 1e-15);
  EXPECT_EQ(sample_sd(VectorXd::Constant(1, 4.0)), 0.0);
}
