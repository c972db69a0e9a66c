#include <gtest/gtest.h>

#include "gcausal/stats.hpp"

using namespace gcausal;

namespace {

// Reference values from scipy 1.15 (kolmogorov, mannwhitneyu asymptotic with
// continuity, cramervonmises_2samp, the midrank k-sample AD sum, wilcoxon
// approx without continuity, ttest_ind with equal_var=False).
const std::vector<double> sample_a = {0.3, 1.2, -0.7, 2.5, 0.3, 1.9, -1.1, 0.8, 0.05, 1.4};
const std::vector<double> sample_b = {1.1, 2.2, 0.3, 3.0, 2.5, 1.7, 0.9, 2.8};

std::vector<double> normals(std::size_t n, rng_t& rng, double shift = 0.0) {
  std::normal_distribution<double> d(shift, 1.0);
  std::vector<double> out(n);
  for (auto& x : out) x = d(rng);
  return out;
}

}  // namespace

TEST(Kolmogorov, MatchesReference) {
  const std::vector<std::pair<double, double>> ref = {
      {0.3, 0.9999906941986655}, {0.5, 0.9639452436648751},  {0.8, 0.5441424115741981},
      {0.99, 0.2808738392255489}, {1.0, 0.26999967167735456}, {1.2, 0.11224966667072497},
      {1.41421356237, 0.0366310527077607}, {2.0, 0.0006709252557796953}};
  for (auto [c, p] : ref) EXPECT_NEAR(kolmogorov_p_value(c), p, 1e-12) << c;
  EXPECT_EQ(kolmogorov_p_value(0.0), 1.0);
  EXPECT_GE(kolmogorov_p_value(1e-3), 0.0);
  double prev = 1.0;
  for (double c = 0.01; c < 3.0; c += 0.01) {
    const double p = kolmogorov_p_value(c);
    EXPECT_LE(p, prev + 1e-15);
    EXPECT_GE(p, 0.0);
    prev = p;
  }
}

TEST(Ks, HandExample) {
  // sup |F_a - F_b| = 1, C = sqrt(25/10)
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {6, 7, 8, 9, 10};
  const auto o = two_sample_test(test_kind::ks, a, b);
  EXPECT_NEAR(o.statistic, std::sqrt(2.5), 1e-12);
  EXPECT_NEAR(o.p_value, 0.013475889875863678, 1e-12);
  const auto same = two_sample_test(test_kind::ks, a, a);
  EXPECT_EQ(same.statistic, 0.0);
  EXPECT_EQ(same.p_value, 1.0);
}

TEST(Ks, MatchesReferenceWithTies) {
  const auto o = two_sample_test(test_kind::ks, sample_a, sample_b);
  EXPECT_NEAR(o.statistic, 1.0013879257199867, 1e-12);
  EXPECT_NEAR(o.p_value, 0.2685148591228448, 1e-10);
}

TEST(Mwu, MatchesReference) {
  const auto o = two_sample_test(test_kind::mwu, sample_a, sample_b);
  EXPECT_DOUBLE_EQ(o.statistic, 17.5);
  EXPECT_NEAR(o.p_value, 0.050017520726972374, 1e-12);
}

TEST(Cvm, StatisticMatchesReference) {
  const auto o = two_sample_test(test_kind::cvm, sample_a, sample_b, 1);
  EXPECT_NEAR(o.statistic, 0.41331018518518503, 1e-12);
  EXPECT_GT(o.p_value, 0.0);
}

TEST(Ad, StatisticMatchesReference) {
  const auto o = two_sample_test(test_kind::ad, sample_a, sample_b, 1);
  EXPECT_NEAR(o.statistic, 2.408290042732606, 1e-12);
}

TEST(Wsr, MatchesReference) {
  const std::vector<double> a(sample_a.begin(), sample_a.begin() + 8);
  EXPECT_NEAR(two_sample_test(test_kind::wsr, a, sample_b).p_value, 0.017290280592906253, 1e-12);
  const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8}, y = {1, 1, 1, 5, 3, 3, 3, 2};
  EXPECT_NEAR(two_sample_test(test_kind::wsr, x, y).p_value, 0.033966233087128726, 1e-12);
  EXPECT_THROW(two_sample_test(test_kind::wsr, sample_a, sample_b), error);
  EXPECT_EQ(two_sample_test(test_kind::wsr, x, x).p_value, 1.0);
}

TEST(Welch, MatchesReference) {
  const auto o = two_sample_test(test_kind::welch, sample_a, sample_b);
  EXPECT_NEAR(o.statistic, -2.318524010495762, 1e-12);
  EXPECT_NEAR(o.p_value, 0.03411424560495908, 1e-10);
}

TEST(Welch, ConstantSamples) {
  const std::vector<double> c1(6, 1.0), c2(6, 2.0);
  EXPECT_EQ(two_sample_test(test_kind::welch, c1, c1).p_value, 1.0);
  const auto o = two_sample_test(test_kind::welch, c1, c2);
  EXPECT_EQ(o.p_value, 0.0);
  EXPECT_TRUE(std::isinf(o.statistic));
}

TEST(Distributions, TAndFTails) {
  EXPECT_NEAR(student_t_two_sided_p(2.1, 7.3), 0.07224671342485328, 1e-12);
  EXPECT_NEAR(f_upper_tail(3.2, 2, 50), 0.04923483749452284, 1e-12);
}

TEST(Tests, SymmetryInArgumentOrder) {
  rng_t rng = make_rng(5);
  const auto a = normals(30, rng), b = normals(45, rng, 0.3);
  for (auto k : {test_kind::ks, test_kind::cvm, test_kind::ad, test_kind::mwu}) {
    const auto ab = two_sample_test(k, a, b, 9), ba = two_sample_test(k, b, a, 9);
    EXPECT_NEAR(ab.p_value, ba.p_value, 1e-12) << to_string(k);
  }
  const auto w1 = two_sample_test(test_kind::welch, a, b), w2 = two_sample_test(test_kind::welch, b, a);
  EXPECT_NEAR(w1.p_value, w2.p_value, 1e-12);
  EXPECT_NEAR(w1.statistic, -w2.statistic, 1e-12);
}

TEST(Tests, PermutationPValuesDeterministicAndNeverZero) {
  const std::vector<double> a = {1, 2, 3, 4, 5, 6}, b = {100, 101, 102, 103, 104, 105};
  for (auto k : {test_kind::cvm, test_kind::ad}) {
    // only the observed split and its mirror image reach the maximum
    const auto o = two_sample_test(k, a, b, 3);
    EXPECT_GE(o.p_value, 1.0 / 200.0);
    EXPECT_LE(o.p_value, 3.0 / 200.0);
    EXPECT_DOUBLE_EQ(o.p_value * 200.0, std::round(o.p_value * 200.0));
    rng_t rng = make_rng(6);
    const auto x = normals(20, rng), y = normals(20, rng);
    EXPECT_EQ(two_sample_test(k, x, y, 4).p_value, two_sample_test(k, x, y, 4).p_value);
  }
}

TEST(Tests, PValuesInUnitInterval) {
  rng_t rng = make_rng(7);
  for (int r = 0; r < 50; ++r) {
    const auto a = normals(12, rng), b = normals(12, rng, 0.5 * (r % 3));
    for (auto k : all_test_kinds) {
      const auto o = two_sample_test(k, a, b, static_cast<std::uint64_t>(r));
      EXPECT_GE(o.p_value, 0.0);
      EXPECT_LE(o.p_value, 1.0);
      EXPECT_EQ(o.n_a, 12u);
    }
  }
}

TEST(Tests, InputValidation) {
  const std::vector<double> four = {1, 2, 3, 4}, five = {1, 2, 3, 4, 5};
  try {
    two_sample_test(test_kind::ks, four, five);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.kind(), error_kind::data);
  }
  std::vector<double> bad = five;
  bad[2] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(two_sample_test(test_kind::mwu, bad, five), error);
  EXPECT_EQ(parse_test_kind("cvm"), test_kind::cvm);
  EXPECT_EQ(parse_test_kind("WELCH"), test_kind::welch);
  EXPECT_THROW(parse_test_kind("shapiro"), error);
}

TEST(Decide, StrictInequality) {
  test_outcome o;
  o.p_value = 0.20;
  EXPECT_FALSE(decide(o, 0.05));
  o.p_value = 0.01;
  EXPECT_TRUE(decide(o, 0.05));
  o.p_value = 0.05;
  EXPECT_FALSE(decide(o, 0.05));
  EXPECT_THROW(decide(o, 0.0), error);
}

TEST(Tests, NullRejectionRateSmallRun) {
  rng_t rng = make_rng(8);
  for (auto k : all_test_kinds) {
    int rejected = 0;
    for (int r = 0; r < 300; ++r) {
      const auto a = normals(60, rng), b = normals(60, rng);
      rejected += decide(two_sample_test(k, a, b, static_cast<std::uint64_t>(r)), 0.05);
    }
    EXPECT_LE(rejected / 300.0, 0.10) << to_string(k);
  }
}

TEST(Sensitivity, TableShapeAndControl) {
  const auto rows = sensitivity_study(40, 100, 3);
  EXPECT_EQ(rows.size(), std::size(all_test_kinds) * std::size(all_perturbations));
  for (const auto& r : rows) {
    if (r.change == perturbation::control) EXPECT_LE(r.power, 0.10) << to_string(r.test);
    if (r.change == perturbation::half_n) EXPECT_EQ(r.n, 20u);
  }
  EXPECT_THROW(sensitivity_study(10, 100, 1), error);
  EXPECT_THROW(sensitivity_study(40, 50, 1), error);
}
