#include <gtest/gtest.h>

#include <chrono>

#include "hbbs/gp.hpp"
#include "oracles.hpp"

using namespace hbbs;

namespace {

std::vector<std::vector<double>> random_points(std::size_t n, std::size_t d, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<std::vector<double>> out(n, std::vector<double>(d));
  for (auto& p : out)
    for (double& v : p) v = u(rng);
  return out;
}

RowMatrix to_matrix(const std::vector<std::vector<double>>& pts) {
  RowMatrix m(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(pts[0].size()));
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts[0].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pts[i][j];
  return m;
}

}  // namespace

TEST(GP, SinglePointInterpolates) {
  GPConfig cfg;
  cfg.noise_variance = 0.0;
  RowMatrix x(1, 2);
  x << 0.3, -0.1;
  const std::vector<double> y{0.4};
  auto m = fit_gp(x, y, cfg);
  auto p = m.predict(std::vector<double>{0.3, -0.1});
  EXPECT_NEAR(p.mu, 0.4, 1e-12);
  EXPECT_LE(p.sigma, 1e-6);
}

TEST(GP, FarQueryRevertsToPrior) {
  GPConfig cfg;
  cfg.center_targets = false;
  RowMatrix x(3, 1);
  x << 0, 0.5, 1;
  const std::vector<double> y{0.2, 0.8, 0.6};
  auto m = fit_gp(x, y, cfg);
  auto p = m.predict(std::vector<double>{12.0});
  EXPECT_NEAR(p.mu, 0.0, 1e-6);
  EXPECT_NEAR(p.sigma * p.sigma, cfg.signal_variance, 1e-6);
  cfg.center_targets = true;
  auto c = fit_gp(x, y, cfg).predict(std::vector<double>{12.0});
  EXPECT_NEAR(c.mu, (0.2 + 0.8 + 0.6) / 3, 1e-6);
}

TEST(GP, MatchesDirectGramSolve) {
  Rng rng(10);
  std::uniform_int_distribution<std::size_t> nn(1, 50), dd(1, 5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = nn(rng), d = dd(rng);
    auto x = random_points(n, d, rng, 2.0);
    std::vector<double> y(n);
    for (double& v : y) v = u(rng);
    GPConfig cfg;
    cfg.length_scale = 0.5 + u(rng);
    cfg.signal_variance = 0.5 + u(rng);
    cfg.noise_variance = 1e-2 * u(rng) + 1e-3;
    cfg.center_targets = t % 2 == 0;
    auto m = fit_gp(to_matrix(x), y, cfg);
    auto q = random_points(20, d, rng, 2.5);
    auto batch = m.predict(to_matrix(q));
    for (std::size_t i = 0; i < q.size(); ++i) {
      auto o = oracle::gp_posterior(x, y, q[i], cfg.length_scale, cfg.signal_variance, cfg.noise_variance,
                                    cfg.center_targets);
      EXPECT_NEAR(batch[i].mu, o.mu, 1e-9);
      EXPECT_NEAR(batch[i].sigma, o.sigma, 1e-9);
      auto single = m.predict(q[i]);
      EXPECT_EQ(single.mu, batch[i].mu);
      EXPECT_EQ(single.sigma, batch[i].sigma);
    }
  }
}

TEST(GP, ZeroNoiseInterpolatesTrainingPoints) {
  Rng rng(11);
  auto x = random_points(30, 3, rng, 3.0);
  std::vector<double> y(30);
  std::uniform_real_distribution<double> u(0, 1);
  for (double& v : y) v = u(rng);
  GPConfig cfg;
  cfg.noise_variance = 0.0;
  auto m = fit_gp(to_matrix(x), y, cfg);
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto p = m.predict(x[i]);
    EXPECT_NEAR(p.mu, y[i], 1e-6);
    EXPECT_LE(p.sigma, 1e-6);
  }
}

TEST(GP, RefitNeverIncreasesSigma) {
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    auto x = random_points(15, 2, rng);
    std::vector<double> y(15, 0.5);
    auto m = fit_gp(to_matrix(x), y, {});
    auto grid = random_points(200, 2, rng, 1.5);
    const auto before = m.predict_sigma(to_matrix(grid));
    auto refit = refit_sigma(m, to_matrix(random_points(5, 2, rng)));
    const auto after = refit.predict_sigma(to_matrix(grid));
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_LE(after[i], before[i] + 1e-12);
    // the mean is untouched
    EXPECT_EQ(refit.predict(grid[0]).mu, m.predict(grid[0]).mu);
  }
}

TEST(GP, RefitWithNothingChangesNothing) {
  Rng rng(13);
  auto x = random_points(10, 3, rng);
  auto m = fit_gp(to_matrix(x), std::vector<double>(10, 0.1), {});
  auto grid = to_matrix(random_points(50, 3, rng));
  RowMatrix none(0, 3);
  const auto a = m.predict_sigma(grid), b = refit_sigma(m, none).predict_sigma(grid);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(GP, RefitCollapsesVarianceAtNewPoint) {
  Rng rng(14);
  auto x = random_points(10, 2, rng);
  GPConfig cfg;
  cfg.noise_variance = 0.0;
  auto m = fit_gp(to_matrix(x), std::vector<double>(10, 0.3), cfg);
  std::vector<std::vector<double>> p{{2.5, -2.5}};
  EXPECT_GT(m.predict(p[0]).sigma, 0.1);
  EXPECT_LE(refit_sigma(m, to_matrix(p)).predict(p[0]).sigma, 1e-6);
}

TEST(GP, DuplicateInputsGetJitter) {
  RowMatrix x(2, 1);
  x << 1.0, 1.0;
  GPConfig cfg;
  cfg.noise_variance = 0.0;
  auto m = fit_gp(x, std::vector<double>{0.2, 0.2}, cfg);
  EXPECT_GT(m.jitter(), 0.0);
  EXPECT_NEAR(m.predict(std::vector<double>{1.0}).mu, 0.2, 1e-9);
}

TEST(GP, FitCostGrowsSuperlinearly) {
  Rng rng(15);
  auto time_fit = [&](std::size_t n) {
    auto x = to_matrix(random_points(n, 5, rng, 3.0));
    std::vector<double> y(n, 0.5);
    double best = 1e9;
    for (int r = 0; r < 3; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      auto m = fit_gp(x, y, {});
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      EXPECT_EQ(m.labeled_count(), n);
    }
    return best;
  };
  const double t1 = time_fit(500), t2 = time_fit(1000);
  EXPECT_GT(t2 / t1, 3.0) << t1 << " " << t2;
}
