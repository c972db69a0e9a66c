#include <gtest/gtest.h>

#include "gcausal/forecaster.hpp"

using namespace gcausal;

namespace {

time_series_panel noise_panel(Index t, Index n, std::uint64_t seed) {
  rng_t rng = make_rng(seed);
  return time_series_panel(standard_normal_matrix(t, n, rng));
}

time_series_panel ar1_panel(Index t, double phi, std::uint64_t seed) {
  rng_t rng = make_rng(seed);
  const MatrixXd e = standard_normal_matrix(t + 100, 1, rng);
  MatrixXd z(t + 100, 1);
  z(0, 0) = e(0, 0);
  for (Index k = 1; k < z.rows(); ++k) z(k, 0) = phi * z(k - 1, 0) + e(k, 0);
  return time_series_panel(z.bottomRows(t));
}

forecaster_config small_config() {
  forecaster_config c;
  c.context_len = 2;
  c.hidden_width = 8;
  c.horizon = 2;
  c.epochs = 5;
  return c;
}

}  // namespace

TEST(Forecaster, GradientMatchesCentralDifferences) {
  const auto c = small_config();
  model_params m = init_params(c, 3, 17);
  rng_t rng = make_rng(4);
  const MatrixXd x = standard_normal_matrix(6, 16, rng);
  const MatrixXd y = standard_normal_matrix(3, 16, rng);
  const auto lg = nll_gradient(m, x, y);
  EXPECT_NEAR(lg.loss, nll(m, x, y), 1e-12);
  const VectorXd theta = m.flatten();
  double worst = 0.0;
  const double h = 1e-5;
  for (Index k = 0; k < theta.size(); ++k) {
    VectorXd tp = theta, tm = theta;
    tp(k) += h;
    tm(k) -= h;
    model_params mp = m, mm = m;
    mp.assign(tp);
    mm.assign(tm);
    const double fd = (nll(mp, x, y) - nll(mm, x, y)) / (2.0 * h);
    const double a = lg.gradient(k);
    worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Forecaster, FlattenAssignRoundTrip) {
  model_params m = init_params(small_config(), 3, 1);
  EXPECT_EQ(m.parameter_count(), 8 * 6 + 8 + 6 * 8 + 6);
  model_params other = init_params(small_config(), 3, 2);
  other.assign(m.flatten());
  EXPECT_EQ(other, m);
  EXPECT_THROW(other.assign(VectorXd::Zero(3)), error);
}

TEST(Forecaster, SigmaRespectsFloor) {
  model_params m = init_params(small_config(), 2, 3);
  m.b2.tail(2).setConstant(-60.0);
  m.w2.bottomRows(2).setZero();
  const auto f = forecast(m, MatrixXd::Zero(2, 2));
  EXPECT_GE(f.sigma.minCoeff(), m.config.sigma_floor);
  EXPECT_LE(f.sigma.maxCoeff(), m.config.sigma_floor + 1e-15);
}

TEST(Forecaster, PureNoiseMatchesEntropyBound) {
  forecaster_config c;
  c.epochs = 20;
  const auto panel = noise_panel(2000, 2, 5);
  const auto res = train_with_history(panel, c);
  auto [x, y] = one_step_samples(panel.values(), c.context_len);
  const auto f = forward(res.params, x);
  EXPECT_GT(f.sigma.mean(), 0.8);
  EXPECT_LT(f.sigma.mean(), 1.2);
  EXPECT_NEAR(nll(res.params, x, y), 0.5 * std::log(2.0 * 3.14159265358979323846 * std::exp(1.0)), 0.2);
}

TEST(Forecaster, Ar1BeatsTheUnconditionalMean) {
  forecaster_config c;
  const auto panel = ar1_panel(2000, 0.9, 8);
  const auto m = train(panel, c);
  auto [x, y] = one_step_samples(panel.values(), c.context_len);
  const auto f = forward(m, x);
  const double mse = (y - f.mu).squaredNorm() / static_cast<double>(y.size());
  const VectorXd col = panel.values().col(0);
  const double var = (col.array() - col.mean()).square().mean();
  EXPECT_LT(mse, var);
  EXPECT_LT(mse, 1.5);  // innovation variance is 1
}

TEST(Forecaster, TrainingKeepsBestParameters) {
  const auto panel = noise_panel(300, 2, 9);
  const auto res = train_with_history(panel, small_config());
  auto [x, y] = one_step_samples(panel.values(), 2);
  const double final_nll = nll(res.params, x, y);
  EXPECT_LE(final_nll, res.initial_nll);
  for (double e : res.epoch_nll) EXPECT_LE(final_nll, e + 1e-15);
}

TEST(Forecaster, DeterministicGivenSeed) {
  const auto panel = noise_panel(300, 2, 10);
  auto c = small_config();
  c.seed = 77;
  EXPECT_EQ(train(panel, c), train(panel, c));
  auto c2 = c;
  c2.seed = 78;
  EXPECT_FALSE(train(panel, c) == train(panel, c2));
}

TEST(Forecaster, ShortSeriesAndBadConfig) {
  auto c = small_config();
  EXPECT_THROW(train(noise_panel(3, 2, 1), c), error);
  c.sigma_floor = 0.0;
  EXPECT_THROW(c.validate(), error);
  c = small_config();
  c.hidden_width = 0;
  EXPECT_THROW(train(noise_panel(100, 2, 1), c), error);
  const model_params m = init_params(small_config(), 2, 1);
  EXPECT_THROW(forecast(m, MatrixXd::Zero(3, 2)), error);
}

TEST(Forecaster, JsonRoundTrip) {
  const model_params m = init_params(small_config(), 3, 12);
  const auto back = model_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(back, m);
}

TEST(Forecaster, RecursiveForecastFeedsBackMeans) {
  const model_params m = init_params(small_config(), 2, 21);
  MatrixXd ctx(2, 2);
  ctx << 0.1, -0.3, 0.5, 0.2;
  const auto f = forecast(m, ctx);
  ASSERT_EQ(f.mu.rows(), 2);
  MatrixXd next(2, 2);
  next.row(0) = ctx.row(1);
  next.row(1) = f.mu.row(0);
  const auto g = forecast(m, next);
  EXPECT_LT((g.mu.row(0) - f.mu.row(1)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Residuals, ConstantOffsetFormula) {
  // Model whose mean is the constant 3 for every input: targets of 2 give
  // zhat = z + 1 and e = 1/|z| = 0.5.
  auto c = small_config();
  c.context_len = 1;
  model_params m = init_params(c, 1, 0);
  m.w2.setZero();
  m.b2 << 3.0, 0.0;
  MatrixXd v(6, 1);
  v << 2, 2, 2, 2, 2, 2;
  const time_series_panel p(v);
  const auto w = make_windows(p, 1, 2, 1);
  const auto r = residuals(m, p, w);
  ASSERT_EQ(r.size(), 1u);
  ASSERT_EQ(r[0].errors.size(), w.size());
  for (double e : r[0].errors) EXPECT_DOUBLE_EQ(e, 0.5);

  v << -4, 1, 4, -4, 1, 0;
  const auto r2 = residuals(m, time_series_panel(v), make_windows(6, 1, 2, 1));
  EXPECT_DOUBLE_EQ(r2[0].errors[0], 0.5 * (2.0 / 1.0 + 1.0 / 4.0));
  EXPECT_DOUBLE_EQ(r2[0].errors[2], 0.5 * (7.0 / 4.0 + 2.0 / 1.0));
  EXPECT_DOUBLE_EQ(r2[0].errors[3], 0.5 * (2.0 / 1.0 + 3.0 / 1e-8));  // zero target uses the 1e-8 floor
}

TEST(Residuals, NoOpSubstitutionIsIdentical) {
  const auto panel = noise_panel(200, 3, 30);
  const auto m = train(panel, small_config());
  const auto w = make_windows(panel, 2, 2, 2);
  const auto base = residuals(m, panel, w);
  column_substitution sub{{0, 2}, MatrixXd(200, 2)};
  sub.columns.col(0) = panel.values().col(0);
  sub.columns.col(1) = panel.values().col(2);
  const auto same = residuals(m, panel, w, sub);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_EQ(base[i].errors, same[i].errors);
  sub.columns.setZero();
  const auto changed = residuals(m, panel, w, sub);
  EXPECT_NE(base[1].errors, changed[1].errors);
}

TEST(Residuals, ValidatesInputs) {
  const auto panel = noise_panel(50, 2, 1);
  const model_params m = init_params(small_config(), 2, 1);
  EXPECT_THROW(residuals(m, panel, {}), error);
  EXPECT_THROW(residuals(m, noise_panel(50, 3, 1), make_windows(50, 2, 2, 2)), error);
  EXPECT_THROW(residuals(m, panel, make_windows(50, 3, 2, 2)), error);
  column_substitution bad{{5}, MatrixXd::Zero(50, 1)};
  EXPECT_THROW(residuals(m, panel, make_windows(50, 2, 2, 2), bad), error);
}
