#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "spatpomp/errors.hpp"
#include "spatpomp/models/bm.hpp"
#include "spatpomp/models/measles.hpp"
#include "support/oracles.hpp"

using namespace spatpomp;

TEST(Bm, CircleDistanceAndMixing) {
  EXPECT_EQ(bm::circle_distance(0, 9, 10), 1u);
  EXPECT_EQ(bm::circle_distance(2, 7, 10), 5u);
  EXPECT_EQ(bm::circle_distance(3, 3, 10), 0u);
  const auto R = bm::mixing_matrix(0.5, 10);
  EXPECT_DOUBLE_EQ(R(0, 9), 0.5);
  EXPECT_DOUBLE_EQ(R(0, 5), 0.03125);
  EXPECT_TRUE(R.isApprox(R.transpose()));
}

TEST(Bm, ParameterLayoutAndValidation) {
  const auto p = bm::default_params(3);
  EXPECT_EQ(p.names(), (std::vector<std::string>{"rho", "sigma", "tau", "X1_0", "X2_0", "X3_0"}));
  EXPECT_TRUE(p.is_ivp(3));
  auto bad = bm::default_params(3);
  bad.set("rho", 1.0);
  EXPECT_THROW(bm::build({3, 4, 1.0}, bad, RngKey{1, 0}), ValidationError);
  ParameterVector unknown;
  unknown.add("nope", 1.0);
  EXPECT_THROW(bm::build({3, 4, 1.0}, unknown, RngKey{1, 0}), ValidationError);
}

TEST(Bm, ProcessIncrementCovariance) {
  // Cov(X_1) = sigma^2 dt R R' from a zero start.
  const auto model = bm::build({3, 1, 0.5}, RngKey{1, 0});
  auto th = bm::default_params(3);
  th.set("sigma", 2.0);
  const auto v = model.theta_vector(th);
  const int n = 40000;
  Eigen::Matrix3d ss = Eigen::Matrix3d::Zero();
  for (int i = 0; i < n; ++i) {
    std::vector<double> x(3, 0.0);
    RngStream rng = RngKey{7, 0}.stream(static_cast<std::uint64_t>(i), 1, Channel::Process);
    model.advance(x, 0.0, 0.5, true, v, rng);
    const Eigen::Vector3d e(x[0], x[1], x[2]);
    ss += e * e.transpose();
  }
  const Eigen::MatrixXd R = bm::mixing_matrix(0.4, 3);
  const Eigen::MatrixXd expected = 4.0 * 0.5 * R * R.transpose();
  EXPECT_LT((ss / n - expected).cwiseAbs().maxCoeff(), 0.06);
}

TEST(Bm, ExactLoglikMatchesDenseOracle) {
  const auto model = bm::build({10, 20, 1.0}, RngKey{4, 0});
  const auto th = bm::default_params(10);
  EXPECT_NEAR(bm::exact_loglik(model, th), oracle::bm_dense_loglik(model, th), 1e-7);
}

TEST(Measles, GravityMatrixEntries) {
  const auto& g = measles::gravity_matrix();
  EXPECT_EQ(g[0][1], 2.205);
  EXPECT_EQ(g[2][3], 1.118);
  for (int u = 0; u < 5; ++u) {
    EXPECT_EQ(g[u][u], 0.0);
    for (int v = 0; v < 5; ++v) EXPECT_EQ(g[u][v], g[v][u]);
  }
}

TEST(Measles, SeasonalityBranches) {
  const double a = 0.554;
  const double term = 1.0 + a * 0.2411 / 0.7589;
  auto at_day = [](double d) { return 1950.0 + d / 365.25; };
  for (double d : {50.0, 150.0, 280.0, 330.0}) EXPECT_DOUBLE_EQ(measles::seasonality(at_day(d), a), term);
  for (double d : {3.0, 107.0, 220.0, 304.0, 360.0}) {
    EXPECT_DOUBLE_EQ(measles::seasonality(at_day(d), a), 1.0 - a);
  }
}

TEST(Measles, ForceOfInfectionCoupling) {
  const std::vector<double> infected = {100.0, 10.0};
  const std::vector<double> pop = {1000.0, 500.0};
  const std::vector<double> vbyg = {0.0, 2.0, 2.0, 0.0};
  const double own = 0.1;
  const double expected = own + 3.0 * 2.0 * (10.0 / 500.0 - own) / 1000.0;
  EXPECT_NEAR(measles::force_of_infection(0, infected, pop, 3.0, vbyg), expected, 1e-15);
  EXPECT_NEAR(measles::force_of_infection(0, infected, pop, 0.0, vbyg), own, 1e-15);
}

TEST(Measles, MeasurementModel) {
  EXPECT_DOUBLE_EQ(measles::measurement_mean(100.0, 0.5), 50.0);
  EXPECT_DOUBLE_EQ(measles::measurement_variance(100.0, 0.5, 0.1), 50.0 * (0.5 + 0.01 * 50.0));
  const double v = 50.0;
  EXPECT_NEAR(measles::measurement_log_density(55.0, 100.0, 0.5, 0.1),
              -0.5 * 25.0 / v - 0.5 * std::log(2.0 * std::numbers::pi * v), 1e-12);
  EXPECT_EQ(measles::measurement_log_density(0.0, 0.0, 0.5, 0.1), 0.0);
  EXPECT_EQ(measles::measurement_log_density(1.0, 0.0, 0.5, 0.1),
            -std::numeric_limits<double>::infinity());
}

TEST(Measles, M5ParametersAndIvpSums) {
  const auto p = measles::m5_params(5);
  EXPECT_EQ(p["R0"], 56.8);
  EXPECT_EQ(p["g"], 100.0);
  EXPECT_EQ(p.size(), 9u + 20u);
  for (int u = 1; u <= 5; ++u) {
    const std::string s = std::to_string(u) + "_0";
    EXPECT_NEAR(p["S" + s] + p["E" + s] + p["I" + s] + p["R" + s], 1.0, 1e-15);
  }
}

TEST(Measles, PackagedDataShape) {
  const auto model = measles::build_packaged(5, SPATPOMP_TEST_DATA_DIR);
  EXPECT_EQ(model.units(), 5u);
  EXPECT_EQ(model.num_times(), 391u);
  EXPECT_EQ(model.obs().unit_names.front(), "LONDON");
  EXPECT_NEAR(model.grid().t0, 1950.0 - 1.0 / 26.0, 1e-12);
  auto bad = measles::m5_params(2);
  bad.set("S1_0", 0.5);
  EXPECT_THROW(measles::build_packaged(2, SPATPOMP_TEST_DATA_DIR, bad), ValidationError);
}

TEST(Measles, StatesStayNonNegativeAndPopulationIsConserved) {
  const auto model = measles::build_packaged(5, SPATPOMP_TEST_DATA_DIR);
  const auto th = model.theta_vector(model.params());
  std::vector<double> x(model.state_dim());
  RngStream rng = RngKey{3, 0}.stream(0, 0, Channel::Process);
  model.rinit(th, rng, x);
  const double dt = 2.0 / 365.0;
  double t = model.grid().t0;
  for (int step = 0; step < 2000; ++step, t += dt) {
    const CovariateValues cov = model.covariates_at(t);
    model.components().rprocess(x, t, dt, th, cov, rng);
    for (std::size_t u = 0; u < 5; ++u) {
      const double* xu = x.data() + u * 6;
      for (int k = 0; k < 5; ++k) ASSERT_GE(xu[k], 0.0);
      const double pop = cov.unit(0, u);
      ASSERT_NEAR(xu[0] + xu[1] + xu[2] + xu[3], pop, 1e-9 * pop);
    }
  }
}

namespace {

// One unit, pop 3389306, birth rate 0; S, E, I, R, C, W.
CovariateValues one_city() { return {1, {3389306.0, 0.0}, {}}; }

std::vector<double> theta_with(double sigma_se) {
  auto p = measles::m5_params(1);
  p.set("sigmaSE", sigma_se);
  return p.values();
}

}  // namespace

TEST(Measles, RinitRoundsFractionsOfPopulation) {
  const auto comp = measles::components({0});
  std::vector<double> x(6, -1.0);
  RngStream rng = RngKey{1, 0}.stream(0, 0, Channel::Init);
  comp.rinit(theta_with(0.02), one_city(), 1950.0, rng, x);
  EXPECT_EQ(x[0], 100662.0);
  EXPECT_EQ(x[4], 0.0);
  EXPECT_EQ(x[5], 0.0);
}

TEST(Measles, EqualPrevalenceCouplingIsNoOp) {
  const std::vector<double> infected = {30.0, 60.0, 90.0};
  const std::vector<double> pop = {1000.0, 2000.0, 3000.0};
  std::vector<double> vbyg(9, 1.7);
  EXPECT_DOUBLE_EQ(measles::force_of_infection(1, infected, pop, 100.0, vbyg), 0.03);
}

TEST(Measles, ExtrademographicNoiseInflatesInfectionVariance) {
  const auto comp = measles::components({0});
  const double dt = 2.0 / 365.0;
  auto spread = [&](double sigma_se) {
    const auto th = theta_with(sigma_se);
    std::vector<double> exposed;
    for (std::uint64_t i = 0; i < 20000; ++i) {
      std::vector<double> x = {100000.0, 2000.0, 2000.0, 3285306.0, 0.0, 0.0};
      RngStream rng = RngKey{5, 0}.stream(i, 0, Channel::Process);
      comp.rprocess(x, 1950.1, dt, th, one_city(), rng);
      exposed.push_back(100000.0 - x[0]);
    }
    return oracle::sd(exposed);
  };
  EXPECT_GT(spread(0.1), 1.2 * spread(0.0));
}

TEST(Measles, StandardizedNoiseIntegralAsSigmaVanishes) {
  // W accumulates (dGamma - dt) / sigmaSE, which tends to N(0, dt) per step.
  const auto comp = measles::components({0});
  const auto th = theta_with(1e-8);
  const double dt = 2.0 / 365.0;
  const int steps = 7;
  std::vector<double> w;
  for (std::uint64_t i = 0; i < 4000; ++i) {
    std::vector<double> x = {100000.0, 2000.0, 2000.0, 3285306.0, 0.0, 0.0};
    RngStream rng = RngKey{6, 0}.stream(i, 0, Channel::Process);
    for (int s = 0; s < steps; ++s) comp.rprocess(x, 1950.1 + s * dt, dt, th, one_city(), rng);
    w.push_back(x[5]);
  }
  const double var = oracle::sd(w) * oracle::sd(w);
  const double horizon = steps * dt;
  EXPECT_NEAR(oracle::mean(w), 0.0, 3.0 * std::sqrt(horizon / 4000.0));
  EXPECT_NEAR(var / horizon, 1.0, 0.1);
}
