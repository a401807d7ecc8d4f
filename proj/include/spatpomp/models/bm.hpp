#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "spatpomp/kalman.hpp"
#include "spatpomp/model.hpp"

namespace spatpomp::bm {

/// Circle distance between units u and v (0-based) among U units.
std::size_t circle_distance(std::size_t u, std::size_t v, std::size_t U);

/// R with R(u, v) = rho^dist(u, v).
Eigen::MatrixXd mixing_matrix(double rho, std::size_t U);

/// Parameters rho, sigma, tau, X1_0..XU_0 (the X's are initial-value
/// parameters). Defaults are rho 0.4, sigma 1, tau 1, X_0 = 0.
ParameterVector default_params(std::size_t U);

ParamTransform default_transform(std::size_t U);

struct BuildSpec {
  std::size_t units = 10;
  std::size_t times = 20;
  double dt_obs = 1.0;
};

/// Correlated Brownian motions on a circle of U units, observed with
/// Gaussian noise at dt_obs, 2 dt_obs, ..., N dt_obs. Data are simulated at
/// `params` (defaults when empty) using `key`.
SpatPompModel build(const BuildSpec& spec, const ParameterVector& params, const RngKey& key);
SpatPompModel build(const BuildSpec& spec, const RngKey& key);

/// Exact linear-Gaussian representation of a bm model at theta.
LinearGaussianSpec to_lgspec(const SpatPompModel& model, const ParameterVector& theta);

/// Exact log likelihood of the model's data at theta.
double exact_loglik(const SpatPompModel& model, const ParameterVector& theta);

}  // namespace spatpomp::bm
