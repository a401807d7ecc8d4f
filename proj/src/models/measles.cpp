#include "spatpomp/models/measles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "spatpomp/csv.hpp"
#include "spatpomp/errors.hpp"
#include "spatpomp/stochastics.hpp"

namespace spatpomp::measles {

namespace {

// Parameter layout.
constexpr std::size_t kR0 = 0;
constexpr std::size_t kAmplitude = 1;
constexpr std::size_t kGamma = 2;
constexpr std::size_t kSigma = 3;
constexpr std::size_t kMu = 4;
constexpr std::size_t kSigmaSE = 5;
constexpr std::size_t kRho = 6;
constexpr std::size_t kPsi = 7;
constexpr std::size_t kG = 8;
constexpr std::size_t kIvp = 9;

// Unit state layout.
constexpr std::size_t S = 0;
constexpr std::size_t E = 1;
constexpr std::size_t I = 2;
constexpr std::size_t R = 3;
constexpr std::size_t C = 4;
constexpr std::size_t W = 5;
constexpr std::size_t K = 6;

constexpr double kTermRatio = 0.2411 / 0.7589;

const std::vector<std::string> kRegular = {"R0",      "amplitude", "gamma", "sigma", "mu",
                                           "sigmaSE", "rho",       "psi",   "g"};

std::vector<double> submatrix(const std::vector<std::size_t>& cities) {
  const std::size_t U = cities.size();
  std::vector<double> m(U * U);
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t v = 0; v < U; ++v) m[u * U + v] = gravity_matrix()[cities[u]][cities[v]];
  }
  return m;
}

void check_ivp_sums(const ParameterVector& p, std::size_t U) {
  for (std::size_t u = 1; u <= U; ++u) {
    const std::string s = std::to_string(u) + "_0";
    const double total = p["S" + s] + p["E" + s] + p["I" + s] + p["R" + s];
    if (std::abs(total - 1.0) > 1e-6) {
      throw ValidationError("initial fractions for unit " + std::to_string(u) +
                            " sum to " + csv::format(total) + ", not 1");
    }
  }
}

}  // namespace

const std::vector<std::string>& city_names() {
  static const std::vector<std::string> names = {"LONDON", "BIRMINGHAM", "LIVERPOOL",
                                                 "MANCHESTER", "LEEDS"};
  return names;
}

const std::array<std::array<double, 5>, 5>& gravity_matrix() {
  static const std::array<std::array<double, 5>, 5> v_by_g = {{
      {0, 2.205, 0.865, 0.836, 0.599},
      {2.205, 0, 0.665, 0.657, 0.375},
      {0.865, 0.665, 0, 1.118, 0.378},
      {0.836, 0.657, 1.118, 0, 0.580},
      {0.599, 0.375, 0.378, 0.580, 0},
  }};
  return v_by_g;
}

double seasonality(double t, double amplitude) {
  const double d = (t - std::floor(t)) * 365.25;
  const bool term = (d >= 7 && d <= 100) || (d >= 115 && d <= 199) || (d >= 252 && d <= 300) ||
                    (d >= 308 && d <= 356);
  return term ? 1.0 + amplitude * kTermRatio : 1.0 - amplitude;
}

double force_of_infection(std::size_t u, std::span<const double> infected,
                          std::span<const double> pop, double g, std::span<const double> vbyg) {
  const std::size_t U = pop.size();
  const double own = infected[u] / pop[u];
  double foi = own;
  for (std::size_t v = 0; v < U; ++v) {
    if (v != u) foi += g * vbyg[u * U + v] * (infected[v] / pop[v] - own) / pop[u];
  }
  return foi;
}

ParameterVector m5_params(std::size_t U) {
  ParameterVector p;
  p.add("R0", 56.8);
  p.add("amplitude", 0.554);
  p.add("gamma", 30.4);
  p.add("sigma", 28.9);
  p.add("mu", 0.02);
  p.add("sigmaSE", 0.02);
  p.add("rho", 0.488);
  p.add("psi", 0.116);
  p.add("g", 100.0);
  const double s0 = 2.97e-2;
  const double e0 = 5.17e-5;
  const double i0 = 5.14e-5;
  // The printed R fraction is rounded; use the remainder so fractions sum to one.
  const double r0 = 1.0 - s0 - e0 - i0;
  const std::pair<const char*, double> ivps[] = {{"S", s0}, {"E", e0}, {"I", i0}, {"R", r0}};
  for (const auto& [name, value] : ivps) {
    for (std::size_t u = 1; u <= U; ++u) {
      p.add(std::string(name) + std::to_string(u) + "_0", value, ParamKind::InitialValue);
    }
  }
  return p;
}

ParamTransform default_transform(std::size_t) {
  return ParamTransform({{"R0", Scale::Log},
                         {"sigmaSE", Scale::Log},
                         {"psi", Scale::Log},
                         {"g", Scale::Log},
                         {"gamma", Scale::Log},
                         {"sigma", Scale::Log},
                         {"mu", Scale::Log},
                         {"rho", Scale::Logit},
                         {"amplitude", Scale::Logit}});
}

double measurement_mean(double c, double rho) { return rho * c; }

double measurement_variance(double c, double rho, double psi) {
  const double m = rho * c;
  return m * (1.0 - rho + psi * psi * m);
}

double measurement_log_density(double y, double c, double rho, double psi) {
  const double m = measurement_mean(c, rho);
  const double v = measurement_variance(c, rho, psi);
  if (!(v > 0.0)) return y == m ? 0.0 : -std::numeric_limits<double>::infinity();
  const double z = (y - m) / std::sqrt(v);
  return -0.5 * z * z - 0.5 * std::log(v) - 0.5 * std::log(2.0 * std::numbers::pi);
}

ModelComponents components(const std::vector<std::size_t>& cities) {
  const std::size_t U = cities.size();
  const std::vector<double> vbyg = submatrix(cities);

  ModelComponents c;
  c.delta = 2.0 / 365.0;
  c.accumulator_names = {"C", "W"};
  c.required_covariates = {"pop", "lag_birthrate"};
  c.required_params = kRegular;
  for (const char* name : {"S", "E", "I", "R"}) {
    for (std::size_t u = 1; u <= U; ++u) {
      c.required_params.push_back(std::string(name) + std::to_string(u) + "_0");
    }
  }

  c.rinit = [U](ThetaView theta, const CovariateValues& covar, double, RngStream&,
                MutableState x) {
    for (std::size_t u = 0; u < U; ++u) {
      const double pop = covar.unit(0, u);
      double* xu = x.data() + u * K;
      xu[S] = std::nearbyint(pop * theta[kIvp + u]);
      xu[E] = std::nearbyint(pop * theta[kIvp + U + u]);
      xu[I] = std::nearbyint(pop * theta[kIvp + 2 * U + u]);
      xu[R] = std::nearbyint(pop * theta[kIvp + 3 * U + u]);
      xu[W] = 0.0;
      xu[C] = 0.0;
    }
  };

  // Units are updated in place in index order, so the force of infection for
  // unit u sees this step's prevalence for units before u.
  c.rprocess = [U, vbyg](MutableState x, double t, double dt, ThetaView theta,
                         const CovariateValues& covar, RngStream& rng) {
    const double seas = seasonality(t, theta[kAmplitude]);
    const double beta = theta[kR0] * (theta[kGamma] + theta[kMu]) * seas;
    const double sigma_se = theta[kSigmaSE];
    const double mu = theta[kMu];
    double rate[6];
    double trans[6];
    for (std::size_t u = 0; u < U; ++u) {
      double* xu = x.data() + u * K;
      const double pop_u = covar.unit(0, u);
      const double br = covar.unit(1, u);
      const double own = xu[I] / pop_u;
      double foi = own;
      for (std::size_t v = 0; v < U; ++v) {
        if (v != u) {
          foi += theta[kG] * vbyg[u * U + v] * (x[v * K + I] / covar.unit(0, v) - own) / pop_u;
        }
      }
      const double dw = rgammawn(sigma_se, dt, rng);
      rate[0] = beta * foi * dw / dt;
      rate[1] = mu;
      rate[2] = theta[kSigma];
      rate[3] = mu;
      rate[4] = theta[kGamma];
      rate[5] = mu;
      const double mean_births = br * dt;
      double births = 0.0;
      if (mean_births > 0.0) {
        births = static_cast<double>(std::poisson_distribution<long long>(mean_births)(rng));
      }
      reulermultinom(xu[S], std::span<const double>(rate, 2), dt, rng, std::span<double>(trans, 2));
      reulermultinom(xu[E], std::span<const double>(rate + 2, 2), dt, rng,
                     std::span<double>(trans + 2, 2));
      reulermultinom(xu[I], std::span<const double>(rate + 4, 2), dt, rng,
                     std::span<double>(trans + 4, 2));
      xu[S] += births - trans[0] - trans[1];
      xu[E] += trans[0] - trans[2] - trans[3];
      xu[I] += trans[2] - trans[4] - trans[5];
      xu[R] = pop_u - xu[S] - xu[E] - xu[I];
      if (sigma_se > 0.0) xu[W] += (dw - dt) / sigma_se;
      xu[C] += trans[4];
    }
  };

  c.dunit_measure = [](double y, StateView xu, std::size_t, double, ThetaView theta,
                       bool give_log) {
    const double ld = measurement_log_density(y, xu[C], theta[kRho], theta[kPsi]);
    return give_log ? ld : std::exp(ld);
  };
  c.runit_measure = [](StateView xu, std::size_t, double, ThetaView theta, RngStream& rng) {
    const double m = measurement_mean(xu[C], theta[kRho]);
    const double v = measurement_variance(xu[C], theta[kRho], theta[kPsi]);
    const double cases = rng.normal(m, std::sqrt(std::max(v, 0.0)));
    return cases > 0.0 ? std::nearbyint(cases) : 0.0;
  };
  c.eunit_measure = [](StateView xu, std::size_t, double, ThetaView theta) {
    return measurement_mean(xu[C], theta[kRho]);
  };
  c.vunit_measure = [](StateView xu, std::size_t, double, ThetaView theta) {
    return measurement_variance(xu[C], theta[kRho], theta[kPsi]);
  };
  c.munit_measure = [](StateView xu, std::size_t, double, double variance, ThetaView theta,
                       std::span<double> out) {
    const double rho = theta[kRho];
    const double m = rho * xu[C];
    const double binomial_var = rho * (1.0 - rho) * xu[C];
    if (variance > binomial_var) out[kPsi] = std::sqrt(variance - binomial_var) / m;
  };
  c.skeleton = [U, vbyg](StateView x, double t, ThetaView theta, const CovariateValues& covar,
                         std::span<double> dxdt) {
    const double seas = seasonality(t, theta[kAmplitude]);
    const double beta = theta[kR0] * (theta[kGamma] + theta[kMu]) * seas;
    const double mu = theta[kMu];
    for (std::size_t u = 0; u < U; ++u) {
      const double* xu = x.data() + u * K;
      double* d = dxdt.data() + u * K;
      const double pop_u = covar.unit(0, u);
      const double own = xu[I] / pop_u;
      double foi = own;
      for (std::size_t v = 0; v < U; ++v) {
        if (v != u) {
          foi += theta[kG] * vbyg[u * U + v] * (x[v * K + I] / covar.unit(0, v) - own) / pop_u;
        }
      }
      d[S] = covar.unit(1, u) - (beta * foi + mu) * xu[S];
      d[E] = beta * foi * xu[S] - (theta[kSigma] + mu) * xu[E];
      d[I] = theta[kSigma] * xu[E] - (theta[kGamma] + mu) * xu[I];
      d[R] = theta[kGamma] * xu[I] - mu * xu[R];
      d[W] = 0.0;
      d[C] = theta[kGamma] * xu[I];
    }
  };
  return c;
}

SpatPompModel build(const std::vector<ObsRecord>& cases,
                    const std::vector<CovariateRecord>& covariates, const ParameterVector& params,
                    double t0) {
  std::vector<std::string> units;
  for (const auto& r : cases) {
    if (std::find(units.begin(), units.end(), r.unit) == units.end()) units.push_back(r.unit);
  }
  std::vector<std::size_t> cities;
  for (const auto& name : units) {
    auto it = std::find(city_names().begin(), city_names().end(), name);
    if (it == city_names().end()) throw ValidationError("unknown city '" + name + "'");
    cities.push_back(static_cast<std::size_t>(it - city_names().begin()));
  }
  const std::size_t U = units.size();
  ParameterVector theta = m5_params(U);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!theta.contains(params.names()[i])) {
      throw ValidationError("measles: unknown parameter '" + params.names()[i] + "'");
    }
    theta.set(params.names()[i], params.at(i));
  }
  check_ivp_sums(theta, U);

  BuildOptions options;
  options.name = "measles";
  options.unit_statenames = {"S", "E", "I", "R", "C", "W"};
  options.obs_name = "cases";
  options.unit_names = units;
  options.transform = default_transform(U);
  return build_model(cases, t0, covariates, components(cities), theta, options);
}

SpatPompModel build_packaged(std::size_t U, const std::string& data_dir,
                             const ParameterVector& params) {
  if (U < 1 || U > city_names().size()) {
    throw ValidationError("measles: U must be between 1 and " +
                          std::to_string(city_names().size()));
  }
  const std::vector<std::string> wanted(city_names().begin(),
                                        city_names().begin() + static_cast<long>(U));
  auto keep = [&](const std::string& unit) {
    return std::find(wanted.begin(), wanted.end(), unit) != wanted.end();
  };
  std::vector<ObsRecord> cases;
  for (auto& r : csv::observations(csv::read(data_dir + "/measles_cases.csv"), "year", "city",
                                   "cases")) {
    if (keep(r.unit)) cases.push_back(std::move(r));
  }
  std::vector<CovariateRecord> covar;
  for (auto& r : csv::covariates(csv::read(data_dir + "/measles_covar.csv"), "year", "city")) {
    if (keep(r.unit)) covar.push_back(std::move(r));
  }
  if (cases.empty()) throw StructuralError("no measles case records found in " + data_dir);
  double t0 = cases.front().time;
  for (const auto& r : cases) t0 = std::min(t0, r.time);
  t0 -= 1.0 / 26.0;
  return build(cases, covar, params, t0);
}

SpatPompModel build_packaged(std::size_t U, const std::string& data_dir) {
  return build_packaged(U, data_dir, ParameterVector{});
}

}  // namespace spatpomp::measles
