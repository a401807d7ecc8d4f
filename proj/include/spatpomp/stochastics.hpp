#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spatpomp/rng.hpp"

namespace spatpomp {

/// Euler-multinomial transitions out of a compartment of `size` individuals
/// over a step of length dt. With total rate m = sum(rates), the number
/// leaving is Binomial(size, 1 - exp(-m dt)), split among exits in proportion
/// to the rates. Writes one count per rate into `transitions`.
void reulermultinom(double size, std::span<const double> rates, double dt, RngStream& rng,
                    std::span<double> transitions);

/// Gamma white-noise increment with mean dt and variance sigma^2 dt, i.e.
/// Gamma(shape = dt / sigma^2, scale = sigma^2). Returns dt exactly when
/// sigma is zero.
double rgammawn(double sigma, double dt, RngStream& rng);

/// Systematic resampling. Returns J ancestor indices whose counts differ from
/// J * w_j / sum(w) by less than one. Throws ResamplingFailure if the weights
/// sum to zero.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, RngStream& rng);

/// Same as systematic_resample with weights given on the log scale.
std::vector<std::size_t> systematic_resample_log(std::span<const double> log_weights,
                                                 RngStream& rng);

/// Draws a single index with probability proportional to exp(log_weights).
std::size_t sample_one_log(std::span<const double> log_weights, RngStream& rng);

/// Multivariate normal draw. The covariance is factored by Cholesky; if that
/// fails, 1e-10 * trace / dim is added to the diagonal and factorization is
/// retried once before a LinearAlgebraError is raised.
Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance,
                         RngStream& rng);

/// Lower Cholesky factor with the same jitter fallback as mvn_draw.
Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& covariance);

double log_sum_exp(std::span<const double> values);
double log_mean_exp(std::span<const double> values);

}  // namespace spatpomp
