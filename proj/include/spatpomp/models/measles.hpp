#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spatpomp/model.hpp"

namespace spatpomp::measles {

/// The packaged cities, in the row order of gravity_matrix().
const std::vector<std::string>& city_names();

/// Movement per unit gravitation constant between the packaged cities.
const std::array<std::array<double, 5>, 5>& gravity_matrix();

/// Term-time multiplier at time t (years).
double seasonality(double t, double amplitude);

/// Per-capita force of infection for unit u before multiplication by beta.
/// `vbyg` is U x U row-major.
double force_of_infection(std::size_t u, std::span<const double> infected,
                          std::span<const double> pop, double g, std::span<const double> vbyg);

/// Regular parameters R0, amplitude, gamma, sigma, mu, sigmaSE, rho, psi, g
/// followed by S1_0..SU_0, E1_0.., I1_0.., R1_0...
ParameterVector m5_params(std::size_t U);
ParamTransform default_transform(std::size_t U);

/// Measurement model pieces for accumulated cases c.
double measurement_mean(double c, double rho);
double measurement_variance(double c, double rho, double psi);
double measurement_log_density(double y, double c, double rho, double psi);

/// Components for the given packaged cities (indices into city_names()).
ModelComponents components(const std::vector<std::size_t>& cities);

/// Builds the model from long-format case and covariate records. Unit names
/// must be packaged cities; units keep the order of first appearance.
SpatPompModel build(const std::vector<ObsRecord>& cases,
                    const std::vector<CovariateRecord>& covariates, const ParameterVector& params,
                    double t0);

/// Loads the first U packaged cities from `data_dir` (measles_cases.csv and
/// measles_covar.csv).
SpatPompModel build_packaged(std::size_t U, const std::string& data_dir,
                             const ParameterVector& params);
SpatPompModel build_packaged(std::size_t U, const std::string& data_dir);

}  // namespace spatpomp::measles
