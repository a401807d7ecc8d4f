#include "spatpomp/models/bm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "spatpomp/errors.hpp"

namespace spatpomp::bm {

namespace {

constexpr std::size_t kRho = 0;
constexpr std::size_t kSigma = 1;
constexpr std::size_t kTau = 2;
constexpr std::size_t kX0 = 3;

double normal_log_density(double y, double mean, double sd) {
  const double z = (y - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

void validate(const ParameterVector& p) {
  if (!(std::abs(p["rho"]) < 1.0)) throw ValidationError("bm: |rho| must be < 1");
  if (!(p["sigma"] >= 0.0)) throw ValidationError("bm: sigma must be nonnegative");
  if (!(p["tau"] >= 0.0)) throw ValidationError("bm: tau must be nonnegative");
}

ModelComponents make_components(std::size_t U) {
  std::vector<std::size_t> dist(U * U);
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t v = 0; v < U; ++v) dist[u * U + v] = circle_distance(u, v, U);
  }

  ModelComponents c;
  c.rinit = [U](ThetaView theta, const CovariateValues&, double, RngStream&, MutableState x) {
    for (std::size_t u = 0; u < U; ++u) x[u] = theta[kX0 + u];
  };
  // Increments are exactly Gaussian, so one step covers any interval.
  c.rprocess = [U, dist](MutableState x, double, double dt, ThetaView theta,
                         const CovariateValues&, RngStream& rng) {
    const double rho = theta[kRho];
    const double sd = theta[kSigma] * std::sqrt(dt);
    double powers[64];
    std::vector<double> power_store;
    double* pw = powers;
    const std::size_t max_d = U / 2 + 1;
    if (max_d > 64) {
      power_store.resize(max_d);
      pw = power_store.data();
    }
    pw[0] = 1.0;
    for (std::size_t d = 1; d < max_d; ++d) pw[d] = pw[d - 1] * rho;
    double dw_small[64];
    std::vector<double> dw_store;
    double* dw = dw_small;
    if (U > 64) {
      dw_store.resize(U);
      dw = dw_store.data();
    }
    for (std::size_t v = 0; v < U; ++v) dw[v] = sd * rng.normal();
    for (std::size_t u = 0; u < U; ++u) {
      double inc = 0.0;
      for (std::size_t v = 0; v < U; ++v) inc += pw[dist[u * U + v]] * dw[v];
      x[u] += inc;
    }
  };
  c.dunit_measure = [](double y, StateView xu, std::size_t, double, ThetaView theta,
                       bool give_log) {
    const double ld = normal_log_density(y, xu[0], theta[kTau]);
    return give_log ? ld : std::exp(ld);
  };
  c.runit_measure = [](StateView xu, std::size_t, double, ThetaView theta, RngStream& rng) {
    return xu[0] + theta[kTau] * rng.normal();
  };
  c.eunit_measure = [](StateView xu, std::size_t, double, ThetaView) { return xu[0]; };
  c.vunit_measure = [](StateView, std::size_t, double, ThetaView theta) {
    return theta[kTau] * theta[kTau];
  };
  c.munit_measure = [](StateView, std::size_t, double, double variance, ThetaView,
                       std::span<double> out) { out[kTau] = std::sqrt(variance); };
  c.skeleton = [](StateView, double, ThetaView, const CovariateValues&, std::span<double> dxdt) {
    for (auto& d : dxdt) d = 0.0;
  };
  c.required_params = {"rho", "sigma", "tau"};
  for (std::size_t u = 0; u < U; ++u) c.required_params.push_back("X" + std::to_string(u + 1) + "_0");
  return c;
}

}  // namespace

std::size_t circle_distance(std::size_t u, std::size_t v, std::size_t U) {
  const auto a = static_cast<long long>(u);
  const auto b = static_cast<long long>(v);
  const auto n = static_cast<long long>(U);
  const long long d = std::min({std::llabs(a - b), std::llabs(a - b + n), std::llabs(a - b - n)});
  return static_cast<std::size_t>(d);
}

Eigen::MatrixXd mixing_matrix(double rho, std::size_t U) {
  const auto n = static_cast<Eigen::Index>(U);
  Eigen::MatrixXd R(n, n);
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t v = 0; v < U; ++v) {
      R(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) =
          std::pow(rho, static_cast<double>(circle_distance(u, v, U)));
    }
  }
  return R;
}

ParameterVector default_params(std::size_t U) {
  ParameterVector p;
  p.add("rho", 0.4);
  p.add("sigma", 1.0);
  p.add("tau", 1.0);
  for (std::size_t u = 0; u < U; ++u) {
    p.add("X" + std::to_string(u + 1) + "_0", 0.0, ParamKind::InitialValue);
  }
  return p;
}

ParamTransform default_transform(std::size_t) {
  return ParamTransform({{"rho", Scale::Logit}, {"sigma", Scale::Log}, {"tau", Scale::Log}});
}

SpatPompModel build(const BuildSpec& spec, const ParameterVector& params, const RngKey& key) {
  if (spec.units < 1 || spec.times < 1) throw ValidationError("bm: U and N must be at least 1");
  if (!(spec.dt_obs > 0.0)) throw ValidationError("bm: observation spacing must be positive");
  const std::size_t U = spec.units;
  ParameterVector defaults = default_params(U);
  ParameterVector theta = defaults;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!theta.contains(params.names()[i])) {
      throw ValidationError("bm: unknown parameter '" + params.names()[i] + "'");
    }
    theta.set(params.names()[i], params.at(i));
  }
  validate(theta);

  TimeGrid grid;
  grid.t0 = 0.0;
  for (std::size_t n = 1; n <= spec.times; ++n) grid.times.push_back(spec.dt_obs * static_cast<double>(n));
  ObservationMatrix obs;
  for (std::size_t u = 0; u < U; ++u) obs.unit_names.push_back("U" + std::to_string(u + 1));
  obs.unit_obsnames = {"Y"};
  obs.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(U),
                                     static_cast<Eigen::Index>(spec.times));

  SpatPompModel shell("bm", grid, obs, CovariateTable{}, {"X"}, make_components(U), theta,
                      default_transform(U));
  const auto sims = simulate(shell, theta, key, 1);
  return with_observations(shell, sims.front().obs);
}

SpatPompModel build(const BuildSpec& spec, const RngKey& key) {
  return build(spec, ParameterVector{}, key);
}

LinearGaussianSpec to_lgspec(const SpatPompModel& model, const ParameterVector& theta) {
  if (model.name() != "bm") throw ValidationError("to_lgspec requires a bm model");
  const std::size_t U = model.units();
  const auto& grid = model.grid();
  const double dt = grid.at(1) - grid.at(0);
  for (std::size_t n = 2; n <= grid.size(); ++n) {
    if (std::abs((grid.at(n) - grid.at(n - 1)) - dt) > 1e-9 * std::max(1.0, dt)) {
      throw ValidationError("to_lgspec requires evenly spaced observation times");
    }
  }
  const double rho = theta["rho"];
  const double sigma = theta["sigma"];
  const double tau = theta["tau"];
  const auto n = static_cast<Eigen::Index>(U);
  const Eigen::MatrixXd R = mixing_matrix(rho, U);

  LinearGaussianSpec spec;
  spec.F = Eigen::MatrixXd::Identity(n, n);
  spec.Q = sigma * sigma * dt * R * R.transpose();
  spec.Q = 0.5 * (spec.Q + spec.Q.transpose());
  spec.H = Eigen::MatrixXd::Identity(n, n);
  spec.R = tau * tau * Eigen::MatrixXd::Identity(n, n);
  spec.m0.resize(n);
  for (std::size_t u = 0; u < U; ++u) {
    spec.m0[static_cast<Eigen::Index>(u)] = theta["X" + std::to_string(u + 1) + "_0"];
  }
  spec.P0 = Eigen::MatrixXd::Zero(n, n);
  return spec;
}

double exact_loglik(const SpatPompModel& model, const ParameterVector& theta) {
  return kf_loglik(to_lgspec(model, theta), model.obs().values).loglik;
}

}  // namespace spatpomp::bm
