#include "spatpomp/stochastics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "spatpomp/errors.hpp"

namespace spatpomp {

void reulermultinom(double size, std::span<const double> rates, double dt, RngStream& rng,
                    std::span<double> transitions) {
  if (size < 0.0 || !std::isfinite(size)) {
    throw ValidationError("reulermultinom: size must be a finite nonnegative count");
  }
  if (!(dt > 0.0)) throw ValidationError("reulermultinom: dt must be positive");
  double total_rate = 0.0;
  for (double r : rates) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw ValidationError("reulermultinom: rates must be finite and nonnegative");
    }
    total_rate += r;
  }
  std::fill(transitions.begin(), transitions.end(), 0.0);
  const auto n = static_cast<long long>(std::llround(size));
  if (n == 0 || total_rate == 0.0) return;

  const double p_exit = -std::expm1(-total_rate * dt);
  long long remaining = std::binomial_distribution<long long>(n, p_exit)(rng);
  double remaining_rate = total_rate;
  for (std::size_t k = 0; k + 1 < rates.size() && remaining > 0; ++k) {
    const double p = std::clamp(rates[k] / remaining_rate, 0.0, 1.0);
    const long long x = std::binomial_distribution<long long>(remaining, p)(rng);
    transitions[k] = static_cast<double>(x);
    remaining -= x;
    remaining_rate -= rates[k];
    if (remaining_rate <= 0.0) break;
  }
  if (remaining > 0 && !rates.empty()) {
    transitions[rates.size() - 1] += static_cast<double>(remaining);
  }
}

double rgammawn(double sigma, double dt, RngStream& rng) {
  if (!(sigma >= 0.0)) throw ValidationError("rgammawn: sigma must be nonnegative");
  if (!(dt > 0.0)) throw ValidationError("rgammawn: dt must be positive");
  if (sigma == 0.0) return dt;
  const double s2 = sigma * sigma;
  return std::gamma_distribution<double>(dt / s2, s2)(rng);
}

namespace {

std::vector<std::size_t> systematic_from_normalized(std::span<const double> weights, double total,
                                                    RngStream& rng) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> ancestors(n);
  const double step = total / static_cast<double>(n);
  double position = rng.uniform() * step;
  double cumulative = weights[0];
  std::size_t i = 0;
  for (std::size_t j = 0; j < n; ++j) {
    while (position >= cumulative && i + 1 < n) {
      ++i;
      cumulative += weights[i];
    }
    // rounding can push the last positions past the final positive weight
    std::size_t pick = i;
    while (weights[pick] == 0.0 && pick > 0) --pick;
    ancestors[j] = pick;
    position += step;
  }
  return ancestors;
}

}  // namespace

std::vector<std::size_t> systematic_resample(std::span<const double> weights, RngStream& rng) {
  if (weights.empty()) return {};
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("systematic_resample: weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw ResamplingFailure("systematic_resample: weights sum to zero");
  }
  return systematic_from_normalized(weights, total, rng);
}

std::vector<std::size_t> systematic_resample_log(std::span<const double> log_weights,
                                                 RngStream& rng) {
  if (log_weights.empty()) return {};
  const double mx = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(mx)) throw ResamplingFailure("systematic_resample: weights sum to zero");
  std::vector<double> w(log_weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(log_weights[i] - mx);
    total += w[i];
  }
  return systematic_from_normalized(w, total, rng);
}

std::size_t sample_one_log(std::span<const double> log_weights, RngStream& rng) {
  const double mx = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(mx)) throw ResamplingFailure("sample_one: weights sum to zero");
  double total = 0.0;
  for (double lw : log_weights) total += std::exp(lw - mx);
  double target = rng.uniform() * total;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    target -= std::exp(log_weights[i] - mx);
    if (target < 0.0) return i;
  }
  for (std::size_t i = log_weights.size(); i-- > 0;) {
    if (std::isfinite(log_weights[i])) return i;
  }
  return 0;
}

Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& covariance) {
  const auto dim = covariance.rows();
  if (covariance.cols() != dim) throw LinearAlgebraError("covariance must be square");
  if (dim == 0) return Eigen::MatrixXd(0, 0);
  if (covariance.cwiseAbs().maxCoeff() == 0.0) return Eigen::MatrixXd::Zero(dim, dim);

  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  const double jitter = 1e-10 * covariance.trace() / static_cast<double>(dim);
  Eigen::MatrixXd adjusted = covariance;
  if (jitter > 0.0) adjusted.diagonal().array() += jitter;
  llt.compute(adjusted);
  if (llt.info() != Eigen::Success) {
    throw LinearAlgebraError("covariance is not positive semidefinite within jitter tolerance");
  }
  return llt.matrixL();
}

Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance,
                         RngStream& rng) {
  if (covariance.rows() != mean.size()) {
    throw LinearAlgebraError("mvn_draw: mean and covariance dimensions differ");
  }
  const Eigen::MatrixXd chol = cholesky_with_jitter(covariance);
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + chol * z;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : values) s += std::exp(v - mx);
  return mx + std::log(s);
}

double log_mean_exp(std::span<const double> values) {
  return log_sum_exp(values) - std::log(static_cast<double>(values.size()));
}

}  // namespace spatpomp
