#include <gtest/gtest.h>

#include "gcausal/knockoffs.hpp"

using namespace gcausal;

namespace {

time_series_panel equicorrelated_panel(Index t, Index n, double rho, std::uint64_t seed) {
  rng_t rng = make_rng(seed);
  return standardize(time_series_panel(equicorrelated_gaussian(t, n, rho, rng))).panel;
}

double self_corr(const MatrixXd& z, const MatrixXd& zk, Index j) {
  const MatrixXd c = sample_cross_covariance(z.col(j), zk.col(j));
  return c(0, 0) / std::sqrt(sample_covariance(z.col(j))(0, 0) * sample_covariance(zk.col(j))(0, 0));
}

}  // namespace

TEST(Knockoffs, ShrinkageScalesOffDiagonal) {
  MatrixXd s(2, 2);
  s << 4.0, 0.9 * 2.0 * 3.0, 0.9 * 2.0 * 3.0, 9.0;
  rng_t rng = make_rng(1);
  const MatrixXd e = standard_normal_matrix(20000, 2, rng);
  const Eigen::LLT<MatrixXd> llt(s);
  const time_series_panel p(e * llt.matrixL().transpose());
  const auto m = estimate_moments(p, 0.1);
  const MatrixXd raw = covariance_to_correlation(sample_covariance(p.values()));
  EXPECT_NEAR(m.correlation(0, 1), 0.9 * raw(0, 1), 1e-12);
  EXPECT_NEAR(m.correlation(0, 1), 0.81, 0.01);
  EXPECT_DOUBLE_EQ(m.covariance(0, 0), sample_covariance(p.values())(0, 0));
}

TEST(Knockoffs, EquicorrelatedSByHand) {
  MatrixXd r(2, 2);
  r << 1, 0.8, 0.8, 1;
  EXPECT_NEAR(equicorrelated_s(r)(0), 0.4, 1e-12);
  r << 1, 0.5, 0.5, 1;
  EXPECT_DOUBLE_EQ(equicorrelated_s(r)(1), 1.0);
  r << 1, 1, 1, 1;
  EXPECT_THROW(equicorrelated_s(r), error);
  r << 2, 0, 0, 1;
  EXPECT_THROW(equicorrelated_s(r), error);
}

TEST(Knockoffs, RepairPsdClipsNegativeEigenvalues) {
  MatrixXd m(2, 2);
  m << 1, 2, 2, 1;  // eigenvalues 3, -1
  const MatrixXd r = repair_psd(m);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(r);
  EXPECT_GE(es.eigenvalues().minCoeff(), psd_floor * 0.999);
  EXPECT_NEAR(es.eigenvalues().maxCoeff(), 3.0, 1e-12);
  EXPECT_LT((r - r.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  MatrixXd ok = MatrixXd::Identity(3, 3);
  EXPECT_EQ(repair_psd(ok), ok);
}

TEST(Knockoffs, IdentityCorrelationGivesIndependentNoise) {
  rng_t rng = make_rng(2);
  const auto z = standardize(time_series_panel(standard_normal_matrix(2000, 3, rng))).panel;
  const auto moments = estimate_moments(z, 0.0);
  const auto ko = sample_knockoffs(z, moments, VectorXd::Ones(3), 5);
  for (Index j = 0; j < 3; ++j) EXPECT_LT(std::abs(self_corr(z.values(), ko.values, j)), 0.1);
}

TEST(Knockoffs, SelfCorrelationIsOneMinusS) {
  const auto z = equicorrelated_panel(2000, 2, 0.8, 3);
  const auto ko = make_knockoffs(z, 0.0, 4);
  EXPECT_NEAR(ko.s(0), 0.4, 0.05);
  for (Index j = 0; j < 2; ++j) EXPECT_NEAR(self_corr(z.values(), ko.values, j), 0.6, 0.1);
}

TEST(Knockoffs, CovarianceMatchesAtLargeT) {
  const auto z = equicorrelated_panel(5000, 4, 0.4, 6);
  const auto ko = make_knockoffs(z, default_shrinkage, 7);
  const auto rep = diagnostics(z, ko);
  EXPECT_LT(rep.cov_match_error, 0.1);
  EXPECT_LT(rep.cross_block_error, 0.1);
  EXPECT_LT(swap_deviation(z.values(), ko.values), 0.15);
}

TEST(Knockoffs, IndependentNoiseHasLowSelfCorrelation) {
  rng_t rng = make_rng(8);
  const auto z = standardize(time_series_panel(standard_normal_matrix(2000, 4, rng))).panel;
  knockoff_panel fake;
  fake.values = standard_normal_matrix(2000, 4, rng);
  fake.s = VectorXd::Ones(4);
  fake.covariance = MatrixXd::Identity(4, 4);
  EXPECT_LT(diagnostics(z, fake).mean_self_corr, 0.1);
}

TEST(Knockoffs, SwapDeviationDetectsABadCopy) {
  const auto z = equicorrelated_panel(2000, 3, 0.5, 9);
  // An exact copy satisfies exchangeability trivially; a scaled copy does not.
  EXPECT_LT(swap_deviation(z.values(), z.values()), 1e-12);
  EXPECT_GT(swap_deviation(z.values(), 2.0 * z.values()), 1.0);
}

TEST(Knockoffs, DeterministicAndValidated) {
  const auto z = equicorrelated_panel(300, 3, 0.5, 10);
  EXPECT_EQ(make_knockoffs(z, 0.1, 1).values, make_knockoffs(z, 0.1, 1).values);
  EXPECT_NE(make_knockoffs(z, 0.1, 1).values, make_knockoffs(z, 0.1, 2).values);
  EXPECT_THROW(make_knockoffs(z, 1.0, 1), error);
  const auto m = estimate_moments(z);
  EXPECT_THROW(sample_knockoffs(z, m, VectorXd::Ones(2), 1), error);
  // s above 2 lambda_min makes 2D - D R^-1 D indefinite
  MatrixXd r(2, 2);
  r << 1, 0.9, 0.9, 1;
  moment_estimate strong{VectorXd::Zero(2), r, r};
  EXPECT_THROW(sample_knockoffs(equicorrelated_panel(100, 2, 0.9, 1), strong, VectorXd::Ones(2), 1), error);
}

TEST(Knockoffs, DimensionSweepTrendAndShape) {
  const auto rows = dimension_sweep({5, 10, 20, 40}, 3, 11);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_GT(rows[k].mean_self_corr, rows[k - 1].mean_self_corr);
  EXPECT_THROW(dimension_sweep({}, 3, 1), error);
  EXPECT_THROW(dimension_sweep({5}, 0, 1), error);
}
