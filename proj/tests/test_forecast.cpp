#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <gtest/gtest.h>

#include "umpc/errors.hpp"
#include "umpc/forecast.hpp"

using namespace umpc;
using namespace umpc::forecast;

namespace {

struct Truth {
  Mat2 a1{{0.5, 0.1}, {0.0, 0.4}};
  Mat2 a2{{-0.2, 0.0}, {0.05, -0.1}};
  Vec2 c{0.1, -0.05};
  Mat2 sigma_u{{0.01, 0.002}, {0.002, 0.02}};
};

std::vector<Vec2> simulate(const Truth& t, int length, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  const Mat2 chol = t.sigma_u.llt().matrixL();
  std::vector<Vec2> v{Vec2::Zero(), Vec2::Zero()};
  for (int i = 0; i < length + 200; ++i) {
    const Vec2 e = chol * Vec2(n01(rng), n01(rng));
    v.push_back(t.c + t.a1 * v[v.size() - 1] + t.a2 * v[v.size() - 2] + e);
  }
  return {v.end() - length, v.end()};
}

VelocityForecast constant_forecast(const Vec2& mu_v, const Covariance2& sigma_v, int n) {
  VelocityForecast vf;
  vf.seed = mu_v;
  vf.steps.assign(static_cast<std::size_t>(n), VelocityStep{mu_v, sigma_v});
  return vf;
}

}  // namespace

TEST(FitVar2, InsufficientData) {
  const std::vector<Vec2> history(5, Vec2(1.0, 0.0));
  EXPECT_THROW(fit_var2(history, 0.5), InsufficientDataError);
}

TEST(FitVar2, ConstantHistoryIsRankDeficient) {
  const std::vector<Vec2> history(20, Vec2(1.0, 0.5));
  EXPECT_THROW(fit_var2(history, 0.5), RankDeficiencyError);
}

TEST(FitVar2, StationaryMeanRecovery) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> jitter(0.0, 1e-4);
  const Vec2 mean(0.4, -0.2);
  std::vector<Vec2> history;
  for (int i = 0; i < 60; ++i) history.push_back(mean + Vec2(jitter(rng), jitter(rng)));
  const Var2Model m = fit_var2(history, 0.5);
  EXPECT_LT((m.a1 + m.a2).cwiseAbs().maxCoeff(), 0.5);
  EXPECT_LT(((Mat2::Identity() - m.a1 - m.a2) * mean - m.c).norm(), 1e-3);
  const VelocityForecast f = forecast_velocity(m, history.back(), history[history.size() - 2], 1);
  EXPECT_LT((f.steps[0].mu_v - mean).norm(), 1e-3);
}

TEST(FitVar2, RecoversKnownCoefficientsWithinThreeStandardErrors) {
  const Truth truth;
  std::mt19937_64 rng(2024);
  const std::vector<Vec2> v = simulate(truth, 2000, rng);
  const Var2Model m = fit_var2(v, 0.5);

  const int rows = static_cast<int>(v.size()) - 2;
  Eigen::MatrixXd x(rows, 5);
  for (int t = 2; t < static_cast<int>(v.size()); ++t) {
    x.row(t - 2) << 1.0, v[t - 1].x(), v[t - 1].y(), v[t - 2].x(), v[t - 2].y();
  }
  const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
  const Mat2 su = m.sigma_u.matrix();
  for (int eq = 0; eq < 2; ++eq) {
    const double est[5] = {m.c(eq), m.a1(eq, 0), m.a1(eq, 1), m.a2(eq, 0), m.a2(eq, 1)};
    const double tru[5] = {truth.c(eq), truth.a1(eq, 0), truth.a1(eq, 1), truth.a2(eq, 0),
                           truth.a2(eq, 1)};
    for (int k = 0; k < 5; ++k) {
      const double se = std::sqrt(su(eq, eq) * xtx_inv(k, k));
      EXPECT_LE(std::abs(est[k] - tru[k]), 3.0 * se) << "equation " << eq << " regressor " << k;
    }
  }
  EXPECT_LT((su - truth.sigma_u).cwiseAbs().maxCoeff(), 0.1 * truth.sigma_u.maxCoeff());
  EXPECT_LT(m.spectral_radius(), 1.0);
  EXPECT_FALSE(m.fallback);
}

TEST(FitVar2, OneStepMseMatchesInnovationCovariance) {
  const Truth truth;
  std::mt19937_64 rng(77);
  const std::vector<Vec2> v = simulate(truth, 4000, rng);
  const std::vector<Vec2> train(v.begin(), v.begin() + 2000);
  const Var2Model m = fit_var2(train, 0.5);
  double sq = 0.0;
  int n = 0;
  for (std::size_t t = 2000; t < v.size(); ++t) {
    const VelocityForecast f = forecast_velocity(m, v[t - 1], v[t - 2], 1);
    sq += (v[t] - f.steps[0].mu_v).squaredNorm();
    ++n;
  }
  const double ratio = (sq / n) / m.sigma_u.trace();
  EXPECT_GE(ratio, 0.9);
  EXPECT_LE(ratio, 1.1);
}

TEST(FitVar2OrFallback, ShortHistoryHoldsLastVelocity) {
  const std::vector<Vec2> history{{0.1, 0.0}, {0.2, 0.0}, {0.3, 0.1}};
  const Var2Model m = fit_var2_or_fallback(history, 0.5);
  EXPECT_TRUE(m.fallback);
  const VelocityForecast f = forecast_velocity(m, history[2], history[1], 5);
  for (const VelocityStep& s : f.steps) EXPECT_LT((s.mu_v - history[2]).norm(), 1e-12);
  EXPECT_GE(m.sigma_u.xx(), kFallbackVarianceFloor);
  EXPECT_GE(m.sigma_u.yy(), kFallbackVarianceFloor);
}

TEST(FitVar2OrFallback, ConstantHistoryFallsBack) {
  const std::vector<Vec2> history(30, Vec2(0.5, 0.0));
  const Var2Model m = fit_var2_or_fallback(history, 0.5);
  EXPECT_TRUE(m.fallback);
  EXPECT_DOUBLE_EQ(m.sigma_u.xx(), kFallbackVarianceFloor);
}

TEST(ForecastVelocity, ZeroDynamics) {
  Var2Model m;
  m.c = Vec2(0.3, 0.0);
  m.sigma_u = Covariance2(0.02, 0.005, 0.01);
  const VelocityForecast f = forecast_velocity(m, Vec2(1.0, 1.0), Vec2(2.0, 2.0), 6);
  ASSERT_EQ(f.steps.size(), 6u);
  EXPECT_EQ(f.seed, Vec2(1.0, 1.0));
  for (const VelocityStep& s : f.steps) {
    EXPECT_NEAR((s.mu_v - Vec2(0.3, 0.0)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((s.sigma_v.matrix() - m.sigma_u.matrix()).norm(), 0.0, 1e-15);
  }
}

TEST(ForecastVelocity, ScalarAutoregressionGeometricSeries) {
  Var2Model m;
  m.a1 = 0.5 * Mat2::Identity();
  m.sigma_u = Covariance2(0.04, 0.01, 0.03);
  const VelocityForecast f = forecast_velocity(m, Vec2(1.0, -1.0), Vec2::Zero(), 15);
  for (int h = 1; h <= 15; ++h) {
    double factor = 0.0;
    for (int j = 0; j < h; ++j) factor += std::pow(0.25, j);
    const Mat2 expected = factor * m.sigma_u.matrix();
    EXPECT_NEAR((f.steps[h - 1].sigma_v.matrix() - expected).cwiseAbs().maxCoeff(), 0.0, 1e-14);
    EXPECT_NEAR((f.steps[h - 1].mu_v - std::pow(0.5, h) * Vec2(1.0, -1.0)).norm(), 0.0, 1e-14);
  }
}

TEST(ForecastVelocity, MatchesMonteCarlo) {
  const Truth truth;
  Var2Model m;
  m.a1 = truth.a1;
  m.a2 = truth.a2;
  m.c = truth.c;
  m.sigma_u = Covariance2::from_matrix(truth.sigma_u);
  const Vec2 latest(0.6, -0.3);
  const Vec2 previous(0.2, 0.1);
  const VelocityForecast f = forecast_velocity(m, latest, previous, 15);

  constexpr int kPaths = 100000;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n01;
  const Mat2 chol = truth.sigma_u.llt().matrixL();
  std::vector<Vec2> sum(16, Vec2::Zero());
  std::vector<Mat2> sum_sq(16, Mat2::Zero());
  for (int p = 0; p < kPaths; ++p) {
    Vec2 l1 = latest;
    Vec2 l2 = previous;
    for (int h = 1; h <= 15; ++h) {
      const Vec2 next = truth.c + truth.a1 * l1 + truth.a2 * l2 + chol * Vec2(n01(rng), n01(rng));
      l2 = l1;
      l1 = next;
      sum[h] += next;
      sum_sq[h] += next * next.transpose();
    }
  }
  for (int h : {1, 5, 15}) {
    const Vec2 mean = sum[h] / kPaths;
    const Mat2 cov = sum_sq[h] / kPaths - mean * mean.transpose();
    const VelocityStep& s = f.steps[h - 1];
    EXPECT_LE((mean - s.mu_v).norm(), 0.02 * s.mu_v.norm()) << "h = " << h;
    EXPECT_LE((cov - s.sigma_v.matrix()).norm(), 0.02 * s.sigma_v.matrix().norm()) << "h = " << h;
  }
}

TEST(ForecastVelocity, TraceNonDecreasing) {
  const Truth truth;
  Var2Model m;
  m.a1 = truth.a1;
  m.a2 = truth.a2;
  m.sigma_u = Covariance2::from_matrix(truth.sigma_u);
  const VelocityForecast f = forecast_velocity(m, Vec2::Zero(), Vec2::Zero(), 30);
  for (std::size_t i = 1; i < f.steps.size(); ++i) {
    EXPECT_GE(f.steps[i].sigma_v.trace(), f.steps[i - 1].sigma_v.trace());
  }
}

TEST(ForecastVelocity, RejectsEmptyHorizon) {
  EXPECT_THROW(forecast_velocity(Var2Model{}, Vec2::Zero(), Vec2::Zero(), 0),
               std::invalid_argument);
}

TEST(PropagatePosition, ZeroVelocity) {
  const Covariance2 s0(0.1, 0.02, 0.05);
  const ObstacleForecast f =
      propagate_position(Vec2(1.0, 2.0), s0, constant_forecast(Vec2::Zero(), Covariance2(), 5),
                         0.5, "d", 0.75);
  ASSERT_EQ(f.size(), 5u);
  EXPECT_EQ(f.obstacle_id, "d");
  EXPECT_DOUBLE_EQ(f.radius, 0.75);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_EQ(f.mu[i], Vec2(1.0, 2.0));
    EXPECT_EQ(f.sigma[i], s0);
  }
}

TEST(PropagatePosition, TrapezoidExample) {
  const ObstacleForecast f = propagate_position(
      Vec2::Zero(), Covariance2(), constant_forecast(Vec2(1.0, 0.0), Covariance2::isotropic(0.04), 2),
      0.5);
  EXPECT_NEAR(f.mu[0].x(), 0.5, 1e-15);
  EXPECT_NEAR(f.sigma[0].xx(), 0.0025, 1e-15);
  EXPECT_NEAR(f.sigma[0].yy(), 0.0025, 1e-15);
  EXPECT_DOUBLE_EQ(f.sigma[0].xy(), 0.0);
  EXPECT_NEAR(f.mu[1].x(), 1.0, 1e-15);
  EXPECT_NEAR(f.sigma[1].xx(), 0.0075, 1e-15);
  EXPECT_NEAR(f.sigma[1].yy(), 0.0075, 1e-15);
}

TEST(PropagatePosition, ExactForConstantVelocity) {
  const Vec2 mu0(-3.0, 4.0);
  const Vec2 v(0.37, -0.21);
  const ObstacleForecast f =
      propagate_position(mu0, Covariance2(), constant_forecast(v, Covariance2(), 15), 0.5);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_LT((f.mu[i] - (mu0 + (i + 1) * 0.5 * v)).norm(), 1e-12);
  }
}

TEST(PropagatePosition, MatchesScriptedRecursionAndTraceIsMonotone) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 100; ++trial) {
    VelocityForecast vf;
    vf.seed = Vec2(n01(rng), n01(rng));
    for (int i = 0; i < 15; ++i) {
      const Mat2 b{{n01(rng), n01(rng)}, {n01(rng), n01(rng)}};
      vf.steps.push_back({Vec2(n01(rng), n01(rng)), Covariance2::from_matrix(0.1 * b * b.transpose())});
    }
    const ObstacleForecast f = propagate_position(Vec2::Zero(), Covariance2(), vf, 0.4);
    Vec2 mu = Vec2::Zero();
    Mat2 sig = Mat2::Zero();
    Vec2 mv_prev = vf.seed;
    Mat2 sv_prev = Mat2::Zero();
    for (std::size_t i = 0; i < 15; ++i) {
      mu += 0.4 * (vf.steps[i].mu_v + mv_prev) / 2.0;
      sig += 0.04 * (vf.steps[i].sigma_v.matrix() + sv_prev);
      mv_prev = vf.steps[i].mu_v;
      sv_prev = vf.steps[i].sigma_v.matrix();
      EXPECT_LT((f.mu[i] - mu).norm(), 1e-12);
      EXPECT_LT((f.sigma[i].matrix() - sig).norm(), 1e-12);
      EXPECT_TRUE(std::isfinite(f.sigma[i].trace()));
      if (i > 0) {
        EXPECT_GE(f.sigma[i].trace(), f.sigma[i - 1].trace());
      }
    }
  }
}

TEST(VelocitiesFromPositions, FirstDifferences) {
  const std::vector<Vec2> p{{0.0, 0.0}, {0.5, 0.0}, {0.5, 1.0}};
  const std::vector<Vec2> v = velocities_from_positions(p, 0.5);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0], Vec2(1.0, 0.0));
  EXPECT_EQ(v[1], Vec2(0.0, 2.0));
  EXPECT_TRUE(velocities_from_positions(std::vector<Vec2>{{1.0, 1.0}}, 0.5).empty());
}
