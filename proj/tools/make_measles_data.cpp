// Writes the packaged measles surrogate: covariates with smooth trends from
// the 1950 values of five English cities, and biweekly cases simulated from
// the five-city model at its reference parameters.
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>

#include "spatpomp/csv.hpp"
#include "spatpomp/models/measles.hpp"

using namespace spatpomp;

int main(int argc, char** argv) {
  const std::string out_dir = argc > 1 ? argv[1] : "data";
  const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 1950;
  constexpr std::size_t kBiweeks = 391;
  const auto& cities = measles::city_names();
  const double pop0[] = {3389306.0, 1117892.5, 802064.9, 704468.0, 509658.5};
  const double br0[] = {70571.23, 24117.23, 19662.96, 15705.46, 10808.73};
  const double pop_trend[] = {-0.07, 0.02, -0.05, -0.04, 0.01};

  std::vector<CovariateRecord> covar;
  std::vector<ObsRecord> placeholder;
  for (std::size_t k = 0; k < kBiweeks; ++k) {
    const double year = 1950.0 + static_cast<double>(k) / 26.0;
    const double frac = static_cast<double>(k) / static_cast<double>(kBiweeks - 1);
    for (std::size_t u = 0; u < cities.size(); ++u) {
      const double pop = std::round(pop0[u] * (1.0 + pop_trend[u] * frac) * 10.0) / 10.0;
      const double br = std::round(br0[u] * (1.0 + 0.15 * frac +
                                             0.02 * std::sin(2.0 * M_PI * (year - 1950.0))) *
                                   100.0) /
                        100.0;
      covar.push_back({year, cities[u], {{"pop", pop}, {"lag_birthrate", br}}});
      placeholder.push_back({year, cities[u], 0.0});
    }
  }

  const auto params = measles::m5_params(cities.size());
  const auto model = measles::build(placeholder, covar, params, 1950.0 - 1.0 / 26.0);
  const auto sim = simulate(model, params, RngKey{seed, 0}, 1).front();

  std::ofstream cases(out_dir + "/measles_cases.csv");
  std::ofstream cov(out_dir + "/measles_covar.csv");
  if (!cases || !cov) {
    std::cerr << "cannot write to " << out_dir << "\n";
    return 1;
  }
  csv::write_row(cases, {"year", "city", "cases"});
  csv::write_row(cov, {"year", "city", "pop", "lag_birthrate"});
  std::size_t row = 0;
  for (std::size_t k = 0; k < kBiweeks; ++k) {
    for (std::size_t u = 0; u < cities.size(); ++u, ++row) {
      const auto& c = covar[row];
      csv::write_row(cases, {csv::format(c.time), c.unit,
                             csv::format(sim.obs(static_cast<Eigen::Index>(u),
                                                 static_cast<Eigen::Index>(k)))});
      csv::write_row(cov, {csv::format(c.time), c.unit, csv::format(c.values.at("pop")),
                           csv::format(c.values.at("lag_birthrate"))});
    }
  }
  return 0;
}
