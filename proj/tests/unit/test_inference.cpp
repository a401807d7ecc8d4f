#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spatpomp/errors.hpp"
#include "spatpomp/inference.hpp"
#include "spatpomp/models/bm.hpp"
#include "spatpomp/stochastics.hpp"

using namespace spatpomp;

namespace {

const SpatPompModel& tiny_bm() {
  static const SpatPompModel m = bm::build({2, 4, 1.0}, RngKey{31, 0});
  return m;
}

PerturbationSpec zero_rw() {
  PerturbationSpec rw;
  rw.fallback = 0.0;
  return rw;
}

}  // namespace

TEST(Cooling, GeometricSchedule) {
  const CoolingSchedule c{0.5};
  EXPECT_DOUBLE_EQ(c.sd_multiplier(0), 1.0);
  EXPECT_DOUBLE_EQ(c.sd_multiplier(50), 0.5);
  EXPECT_DOUBLE_EQ(c.sd_multiplier(100), 0.25);
  EXPECT_NEAR(c.sd_multiplier(25), std::sqrt(0.5), 1e-15);
  EXPECT_DOUBLE_EQ(c.variance_multiplier(50), 0.25);
  EXPECT_DOUBLE_EQ(c.variance_multiplier(100), 0.0625);
  EXPECT_THROW(CoolingSchedule{0.0}.validate(), ValidationError);
  EXPECT_THROW(CoolingSchedule{1.5}.validate(), ValidationError);
  EXPECT_NO_THROW(CoolingSchedule{1.0}.validate());
}

TEST(Perturbation, ResolveRequiresEveryParameter) {
  const auto& m = tiny_bm();
  PerturbationSpec rw;
  rw.sd = {{"rho", 0.02}, {"sigma", 0.02}};
  EXPECT_THROW(rw.resolve(m), ValidationError);
  rw.fallback = 0.0;
  const auto r = rw.resolve(m);
  EXPECT_EQ(r.sd, (std::vector<double>{0.02, 0.02, 0.0, 0.0, 0.0}));
  EXPECT_EQ(r.ivp, (std::vector<bool>{false, false, false, true, true}));
  rw.sd["bogus"] = 1.0;
  EXPECT_THROW(rw.resolve(m), ValidationError);
  PerturbationSpec neg;
  neg.fallback = -1.0;
  EXPECT_THROW(neg.resolve(m), ValidationError);
}

TEST(Search, ZeroRandomWalkLeavesParametersUnchanged) {
  const auto& m = tiny_bm();
  auto start = m.params();
  start.set("rho", 0.3);
  const auto g = igirf(m, start, 2, GirfOptions{20, 2, 5, 1}, zero_rw(), {0.5}, RngKey{1, 0});
  ASSERT_EQ(g.trace.size(), 2u);
  for (std::size_t i = 0; i < start.size(); ++i) EXPECT_NEAR(g.estimate.at(i), start.at(i), 1e-12);
  const auto e = ienkf(m, start, 2, 20, zero_rw(), {0.5}, RngKey{1, 0});
  for (std::size_t i = 0; i < start.size(); ++i) EXPECT_NEAR(e.estimate.at(i), start.at(i), 1e-12);
  IubfOptions o;
  o.Nubf = 2;
  o.Nparam = 4;
  o.Nrep_per_param = 3;
  o.prop = 0.5;
  const auto u = iubf(m, start, o, zero_rw(), {0.5}, RngKey{1, 0});
  for (std::size_t i = 0; i < start.size(); ++i) EXPECT_NEAR(u.estimate.at(i), start.at(i), 1e-12);
}

TEST(Search, ThreadInvarianceAndDeterminism) {
  const auto& m = tiny_bm();
  PerturbationSpec rw;
  rw.sd = {{"rho", 0.02}, {"sigma", 0.02}, {"tau", 0.02}};
  rw.fallback = 0.0;
  const GirfOptions go{20, 2, 5, 1};
  const auto a = igirf(m, m.params(), 2, go, rw, {0.5}, RngKey{4, 0}, 1);
  const auto b = igirf(m, m.params(), 2, go, rw, {0.5}, RngKey{4, 0}, 3);
  EXPECT_EQ(a.estimate.values(), b.estimate.values());
  EXPECT_NE(a.estimate.values(), m.params().values());
  const auto c = ienkf(m, m.params(), 2, 30, rw, {0.5}, RngKey{4, 0}, 1);
  const auto d = ienkf(m, m.params(), 2, 30, rw, {0.5}, RngKey{4, 0}, 2);
  EXPECT_EQ(c.estimate.values(), d.estimate.values());
  IubfOptions o;
  o.Nubf = 2;
  o.Nparam = 4;
  o.Nrep_per_param = 2;
  const auto e = iubf(m, m.params(), o, rw, {0.5}, RngKey{4, 0}, 1);
  const auto f = iubf(m, m.params(), o, rw, {0.5}, RngKey{4, 0}, 2);
  EXPECT_EQ(e.estimate.values(), f.estimate.values());
}

TEST(Search, IubfKeepsEverythingWhenPropIsOne) {
  const auto& m = tiny_bm();
  PerturbationSpec rw;
  rw.sd = {{"rho", 0.05}};
  rw.fallback = 0.0;
  IubfOptions o;
  o.Nubf = 1;
  o.Nparam = 3;
  o.Nrep_per_param = 2;
  o.prop = 1.0;
  const auto r = iubf(m, m.params(), o, rw, {0.5}, RngKey{6, 0});
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.trace[0].loglik));
  EXPECT_EQ(r.swarm.cols(), 3);
  o.prop = 0.1;
  EXPECT_THROW(iubf(m, m.params(), o, rw, {0.5}, RngKey{6, 0}), ValidationError);
}

TEST(SelectTop, TiesGoToLowerIndex) {
  using detail::select_top;
  EXPECT_EQ(select_top({1, 3, 3, 2}, 0.5), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(select_top({5, 5, 5, 5}, 0.5), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(select_top({1, 2, 3}, 0.5), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(select_top({1, NAN, 0}, 0.34), (std::vector<std::size_t>{0, 2}));
  EXPECT_THROW(select_top({1, 2}, 0.0), ValidationError);
  EXPECT_THROW(select_top({1, 2, 3}, 0.2), ValidationError);
}

TEST(SelectTop, MatchesBruteForce) {
  RngStream rng = RngKey{9, 0}.stream(0, 0, Channel::Select);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 12);
    std::vector<double> r(n);
    for (auto& v : r) v = std::floor(rng.uniform() * 4);  // plenty of ties
    const double p = std::max(1.0 / static_cast<double>(n), rng.uniform());
    const auto got = detail::select_top(r, p);
    const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return r[a] != r[b] ? r[a] > r[b] : a < b; });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    ASSERT_EQ(got, idx);
  }
}

TEST(LogMeanExp, KnownValuesAndShift) {
  const auto a = logmeanexp({0.0, -1.0, -2.0}, true);
  EXPECT_NEAR(a.value, std::log((1.0 + std::exp(-1.0) + std::exp(-2.0)) / 3.0), 1e-14);
  EXPECT_NEAR(a.value, -0.6910, 5e-5);
  ASSERT_TRUE(a.se.has_value());
  const auto b = logmeanexp({1000.0, 999.0, 998.0}, true);
  EXPECT_NEAR(b.value, a.value + 1000.0, 1e-10);
  EXPECT_NEAR(*b.se, *a.se, 1e-10);
  EXPECT_FALSE(logmeanexp({1.0}).se.has_value());
  EXPECT_DOUBLE_EQ(logmeanexp({-3.0, -3.0}, true).value, -3.0);
  EXPECT_DOUBLE_EQ(*logmeanexp({-3.0, -3.0}, true).se, 0.0);
  EXPECT_THROW(logmeanexp({}), ValidationError);
  EXPECT_THROW(logmeanexp({1.0}, true), ValidationError);
}

TEST(LogMeanExp, JackknifeByHand) {
  const std::vector<double> v = {0.0, -1.0, -2.0};
  const double l0 = std::log((std::exp(-1.0) + std::exp(-2.0)) / 2);
  const double l1 = std::log((1 + std::exp(-2.0)) / 2);
  const double l2 = std::log((1 + std::exp(-1.0)) / 2);
  const double m = (l0 + l1 + l2) / 3;
  const double sd = std::sqrt(((l0 - m) * (l0 - m) + (l1 - m) * (l1 - m) + (l2 - m) * (l2 - m)) / 2);
  EXPECT_NEAR(*logmeanexp(v, true).se, 2 * sd / std::sqrt(3.0), 1e-14);
}

TEST(ProfileDesign, CountsAndBox) {
  const auto base = bm::default_params(2);
  ParameterVector lo, hi;
  lo.add("sigma", 0.5);
  lo.add("tau", 0.2);
  hi.add("sigma", 2.0);
  hi.add("tau", 0.2);
  const auto tr = bm::default_transform(2);
  const auto d = profile_design("rho", {0.1, 0.2, 0.3}, base, lo, hi, tr, 4, RngKey{3, 0});
  ASSERT_EQ(d.starts.size(), 12u);
  for (std::size_t i = 0; i < d.starts.size(); ++i) {
    const auto& s = d.starts[i];
    EXPECT_DOUBLE_EQ(s["rho"], d.grid[i / 4]);
    EXPECT_GE(s["sigma"], 0.5);
    EXPECT_LE(s["sigma"], 2.0);
    EXPECT_NEAR(s["tau"], 0.2, 1e-14);
    EXPECT_EQ(s["X1_0"], base["X1_0"]);
  }
  EXPECT_NE(d.starts[0]["sigma"], d.starts[1]["sigma"]);
  const auto again = profile_design("rho", {0.1, 0.2, 0.3}, base, lo, hi, tr, 4, RngKey{3, 0});
  EXPECT_EQ(again.starts[7].values(), d.starts[7].values());
  EXPECT_THROW(profile_design("rho", {}, base, lo, hi, tr, 1, RngKey{}), ValidationError);
  EXPECT_THROW(profile_design("sigma", {1.0}, base, lo, hi, tr, 1, RngKey{}), ValidationError);
  EXPECT_THROW(profile_design("rho", {0.1}, base, hi, lo, tr, 1, RngKey{}), ValidationError);
}

TEST(Mcap, ExactQuadratic) {
  std::vector<double> x, y;
  for (int i = 0; i <= 20; ++i) {
    x.push_back(i / 10.0);
    y.push_back(-2.0 * (x.back() - 1.0) * (x.back() - 1.0));
  }
  const auto r = mcap(y, x);
  EXPECT_NEAR(r.maximizer, 1.0, 1.5e-3);
  EXPECT_NEAR(r.se_stat, 0.5, 1e-6);
  EXPECT_NEAR(r.se_mc, 0.0, 1e-5);
  const double q = 3.841458820694124;
  EXPECT_NEAR(r.cutoff, 0.5 * q, 1e-6);
  const double half = std::sqrt(0.5 * q / 2.0);
  EXPECT_NEAR(r.lo, 1.0 - half, 3e-3);
  EXPECT_NEAR(r.hi, 1.0 + half, 3e-3);
  EXPECT_FALSE(r.one_sided);
  EXPECT_EQ(r.grid.size(), 1000u);
}

TEST(Mcap, FlatProfileGivesFullRange) {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6};
  const std::vector<double> y(6, -10.0);
  const auto r = mcap(y, x);
  EXPECT_TRUE(std::isinf(r.cutoff));
  EXPECT_DOUBLE_EQ(r.lo, 1.0);
  EXPECT_DOUBLE_EQ(r.hi, 6.0);
  EXPECT_TRUE(r.one_sided);
}

TEST(Mcap, InputValidation) {
  EXPECT_THROW(mcap({1, 2, 3, 4}, {1, 2, 3, 4}), ValidationError);
  EXPECT_THROW(mcap({1, 2, 3, 4, 5}, {1, 1, 2, 2, 3}), ValidationError);
  EXPECT_THROW(mcap({1, 2}, {1, 2, 3}), ValidationError);
  EXPECT_THROW(mcap({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}, 1.5), ValidationError);
  // Non-finite rows are dropped before the distinct-value check.
  EXPECT_THROW(mcap({1, 2, 3, 4, NAN}, {1, 2, 3, 4, 5}), ValidationError);
}
