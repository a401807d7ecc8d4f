#include <gtest/gtest.h>

#include <cmath>

#include "spatpomp/errors.hpp"
#include "spatpomp/filters.hpp"
#include "spatpomp/kalman.hpp"
#include "spatpomp/model.hpp"
#include "spatpomp/models/bm.hpp"
#include "support/oracles.hpp"

using namespace spatpomp;

namespace {

// Two units with a deterministic clock state x and a step counter C.
ModelComponents clock_components() {
  ModelComponents c;
  c.rinit = [](ThetaView theta, const CovariateValues&, double, RngStream&, MutableState x) {
    for (std::size_t u = 0; u < 2; ++u) {
      x[2 * u] = theta[0];
      x[2 * u + 1] = 0.0;
    }
  };
  c.rprocess = [](MutableState x, double, double dt, ThetaView, const CovariateValues&,
                  RngStream&) {
    for (std::size_t u = 0; u < 2; ++u) {
      x[2 * u] += dt;
      x[2 * u + 1] += 1.0;
    }
  };
  c.delta = 0.3;
  c.dunit_measure = [](double y, StateView xu, std::size_t, double, ThetaView, bool give_log) {
    const double ld = -0.5 * (y - xu[0]) * (y - xu[0]) - 0.5 * std::log(2.0 * M_PI);
    return give_log ? ld : std::exp(ld);
  };
  c.runit_measure = [](StateView xu, std::size_t, double, ThetaView, RngStream&) { return xu[0]; };
  c.skeleton = [](StateView, double, ThetaView, const CovariateValues& cov, std::span<double> dxdt) {
    for (std::size_t u = 0; u < 2; ++u) {
      dxdt[2 * u] = cov.unit_values[u];
      dxdt[2 * u + 1] = 0.0;
    }
  };
  c.accumulator_names = {"C"};
  c.required_params = {"x0"};
  c.required_covariates = {"k"};
  return c;
}

SpatPompModel clock_model(double missing_value = 0.5) {
  std::vector<ObsRecord> data;
  std::vector<CovariateRecord> cov;
  for (int n = 1; n <= 3; ++n) {
    data.push_back({static_cast<double>(n), "a", n == 2 ? kMissing : missing_value});
    data.push_back({static_cast<double>(n), "b", 1.0});
  }
  for (int n = 0; n <= 3; ++n) {
    cov.push_back({static_cast<double>(n), "a", {{"k", 2.0 * n}}});
    cov.push_back({static_cast<double>(n), "b", {{"k", 1.0}}});
  }
  ParameterVector p;
  p.add("x0", 0.0, ParamKind::InitialValue);
  BuildOptions opts;
  opts.unit_statenames = {"x", "C"};
  return build_model(data, 0.0, cov, clock_components(), p, opts);
}

}  // namespace

TEST(ParameterVector, LookupAndErrors) {
  ParameterVector p;
  p.add("a", 1.0);
  p.add("b", 2.0, ParamKind::InitialValue);
  EXPECT_EQ(p["b"], 2.0);
  EXPECT_TRUE(p.is_ivp(1));
  EXPECT_FALSE(p.is_ivp(0));
  EXPECT_THROW(p.add("a", 3.0), ValidationError);
  EXPECT_THROW(p["zz"], ValidationError);
}

TEST(ParamTransform, RoundTripsAndHalving) {
  ParamTransform t({{"s", Scale::Log}, {"r", Scale::Logit}});
  EXPECT_NEAR(t.from_est("s", t.to_est("s", 3.7)), 3.7, 1e-14);
  EXPECT_NEAR(t.from_est("r", t.to_est("r", 0.23)), 0.23, 1e-14);
  EXPECT_EQ(t.to_est("other", -4.0), -4.0);
  // Moving log 2 down on the log scale halves the natural value.
  EXPECT_NEAR(t.from_est("s", t.to_est("s", 1.0) - std::log(2.0)), 0.5, 1e-15);
  EXPECT_THROW(t.to_est("s", 0.0), ValidationError);
  EXPECT_THROW(t.to_est("r", 1.0), ValidationError);
}

TEST(Model, BuildRejectsRaggedAndDuplicateData) {
  std::vector<ObsRecord> ragged = {{1.0, "a", 0.0}, {1.0, "b", 0.0}, {2.0, "a", 0.0}};
  BuildOptions opts;
  opts.unit_statenames = {"x"};
  EXPECT_THROW(build_model(ragged, 0.0, {}, {}, {}, opts), StructuralError);
  std::vector<ObsRecord> dup = {{1.0, "a", 0.0}, {1.0, "a", 1.0}};
  EXPECT_THROW(build_model(dup, 0.0, {}, {}, {}, opts), StructuralError);
}

TEST(Model, RequiredParametersChecked) {
  auto c = clock_components();
  c.required_params = {"x0", "missing"};
  std::vector<ObsRecord> data = {{1.0, "a", 0.0}};
  std::vector<CovariateRecord> cov = {{0.0, "a", {{"k", 1.0}}}};
  ParameterVector p;
  p.add("x0", 0.0);
  BuildOptions opts;
  opts.unit_statenames = {"x", "C"};
  EXPECT_THROW(build_model(data, 0.0, cov, c, p, opts), ValidationError);
}

TEST(Model, EulerSubstepsAndAccumulatorReset) {
  const auto model = clock_model();
  const auto th = model.theta_vector(model.params());
  std::vector<double> x(4);
  RngStream rng(1, {});
  model.rinit(th, rng, x);
  model.advance(x, 0.0, 1.0, true, th, rng);
  EXPECT_NEAR(x[0], 1.0, 1e-12);
  EXPECT_EQ(x[1], 4.0);  // ceil(1 / 0.3) steps
  model.advance(x, 1.0, 1.5, false, th, rng);
  EXPECT_EQ(x[1], 6.0);  // no reset mid-interval
  model.advance(x, 1.5, 2.0, true, th, rng);
  EXPECT_EQ(x[1], 2.0);
  model.advance(x, 2.0, 2.0, true, th, rng);
  EXPECT_EQ(x[1], 2.0);  // empty interval leaves accumulators alone
}

TEST(Model, MissingObservationContributesZero) {
  const auto model = clock_model();
  const auto th = model.theta_vector(model.params());
  const std::vector<double> x = {2.0, 0.0, 2.0, 0.0};
  EXPECT_EQ(model.unit_log_density(0, 2, x, th), 0.0);
  EXPECT_NEAR(model.unit_log_density(1, 2, x, th), -0.5 - 0.5 * std::log(2.0 * M_PI), 1e-12);
}

TEST(Model, CapabilityErrorNamesComponent) {
  const auto model = clock_model();
  try {
    enkf(model, model.params(), 10, RngKey{1, 0});
    FAIL() << "expected a capability error";
  } catch (const CapabilityError& e) {
    EXPECT_EQ(e.component(), "eunit_measure");
  }
}

TEST(Model, SkeletonFollowsInterpolatedCovariate) {
  const auto model = clock_model();
  // dx/dt = 2t for unit a, so x(2) - x(0) = 4.
  const auto out = skeleton_trajectory(model, std::vector<double>{0, 0, 0, 0}, 0.0, 2.0, model.params());
  EXPECT_NEAR(out[0], 4.0, 1e-9);
  EXPECT_NEAR(out[2], 2.0, 1e-12);
  EXPECT_THROW(skeleton_trajectory(model, std::vector<double>{0, 0, 0, 0}, 2.0, 1.0, model.params()),
               ValidationError);
}

TEST(Model, SimulateIsDeterministic) {
  const auto model = bm::build({3, 4, 1.0}, RngKey{2, 0});
  const auto a = simulate(model, model.params(), RngKey{5, 0}, 2);
  const auto b = simulate(model, model.params(), RngKey{5, 0}, 2);
  EXPECT_EQ(a[0].obs, b[0].obs);
  EXPECT_EQ(a[1].states, b[1].states);
  EXPECT_NE(a[0].obs, a[1].obs);
}

TEST(Kalman, MatchesDenseGaussianOracle) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto model = bm::build({3, 6, 0.5}, RngKey{seed, 0});
    auto th = bm::default_params(3);
    th.set("rho", 0.7);
    th.set("sigma", 1.3);
    th.set("tau", 0.6);
    th.set("X2_0", 0.4);
    EXPECT_NEAR(bm::exact_loglik(model, th), oracle::bm_dense_loglik(model, th), 1e-8);
  }
}

TEST(Kalman, ScalarRandomWalkByHand) {
  LinearGaussianSpec s;
  s.F = Eigen::MatrixXd::Identity(1, 1);
  s.Q = Eigen::MatrixXd::Constant(1, 1, 1.0);
  s.H = Eigen::MatrixXd::Identity(1, 1);
  s.R = Eigen::MatrixXd::Constant(1, 1, 1.0);
  s.m0 = Eigen::VectorXd::Zero(1);
  s.P0 = Eigen::MatrixXd::Zero(1, 1);
  Eigen::MatrixXd y(1, 1);
  y << 1.0;
  // Y_1 ~ N(0, 2).
  EXPECT_NEAR(kf_loglik(s, y).loglik, -0.5 * std::log(2.0 * M_PI * 2.0) - 0.25, 1e-14);
  s.Q(0, 0) = -1.0;
  EXPECT_THROW(kf_loglik(s, y), ValidationError);
}
