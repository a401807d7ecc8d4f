#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spatpomp/model.hpp"

namespace spatpomp {

/// Natural-scale weight below which a time step counts as a filtering failure.
inline constexpr double kWeightTolerance = 1e-300;

struct FilterResult {
  double loglik = 0.0;
  /// Per-time components (per (n, s) for girf); they sum to loglik.
  std::vector<double> cond_loglik;
  /// U x N conditional log likelihoods, filled by abf only.
  Eigen::MatrixXd unit_cond_loglik;
  /// state_dim x J filter particles at the final time.
  Eigen::MatrixXd filter_particles;
  std::size_t n_failures = 0;
};

/// Points (u, n) with u 0-based and n 1-based.
using SpaceTimePoint = std::pair<std::size_t, std::size_t>;

/// B_{u,n} as a function of (u, n). Every point must satisfy n' < n, or
/// u' < u and n' = n, with n' >= 1.
struct NeighborhoodSpec {
  std::function<std::vector<SpaceTimePoint>(std::size_t u, std::size_t n)> points;

  /// {(u-1, n), (u, n-1)} where those exist.
  static NeighborhoodSpec adjacent();
  /// All of A_{u,n} restricted to observation times n' >= 1.
  static NeighborhoodSpec full(std::size_t U);
  static NeighborhoodSpec preset(const std::string& name, std::size_t U);

  /// Throws ValidationError at the first invalid point.
  void validate(std::size_t U, std::size_t N) const;
};

/// Disjoint unit blocks covering 0..U-1.
struct BlockPartition {
  std::vector<std::vector<std::size_t>> blocks;

  /// Consecutive blocks of `size` units; the last may be smaller.
  static BlockPartition by_size(std::size_t U, std::size_t size);
  void validate(std::size_t U) const;
};

struct GirfOptions {
  std::size_t Np = 0;
  std::size_t Ninter = 0;
  std::size_t Nguide = 0;
  std::size_t Lookahead = 0;

  void validate(std::size_t N) const;
};

FilterResult pfilter(const SpatPompModel& model, const ParameterVector& theta, std::size_t Np,
                     const RngKey& key, int threads = 1);

FilterResult girf(const SpatPompModel& model, const ParameterVector& theta,
                  const GirfOptions& options, const RngKey& key, int threads = 1);

FilterResult abf(const SpatPompModel& model, const ParameterVector& theta, std::size_t Nrep,
                 std::size_t Np, const NeighborhoodSpec& nbhd, const RngKey& key,
                 int threads = 1);

FilterResult enkf(const SpatPompModel& model, const ParameterVector& theta, std::size_t Np,
                  const RngKey& key, int threads = 1);

FilterResult bpfilter(const SpatPompModel& model, const ParameterVector& theta, std::size_t Np,
                      const BlockPartition& blocks, const RngKey& key, int threads = 1);

/// Deterministic trajectory from time s to t by fixed-step RK4 on the
/// skeleton, with step no larger than the model's Euler step.
std::vector<double> skeleton_trajectory(const SpatPompModel& model, std::span<const double> x,
                                        double s, double t, const ParameterVector& theta);

namespace detail {

void skeleton_integrate(const SpatPompModel& model, MutableState x, double s, double t,
                        ThetaView theta);

/// Per-particle parameter hook used by iterated GIRF. Called at each (n, s)
/// before the prediction step with the J x D particle parameter block
/// (natural scale, row-major) so that it can be perturbed in place.
using GirfPerturb = std::function<void(std::size_t n, std::size_t s, std::vector<double>& theta)>;

/// GIRF with particle-specific parameters. `theta` holds J rows of D values;
/// on return it holds the resampled swarm.
FilterResult girf_engine(const SpatPompModel& model, std::vector<double>& theta,
                         const GirfOptions& options, const RngKey& key, int threads,
                         const GirfPerturb& perturb);

/// EnKF analysis step on an ensemble Z whose first state_dim rows are the
/// state (extra rows are carried along, e.g. parameters). `forecast` holds
/// U x J predicted measurements and `meas_var` the per-unit mean measurement
/// variances. Missing units are dropped from the update. Returns the
/// conditional log likelihood.
double enkf_analysis(Eigen::MatrixXd& Z, const Eigen::MatrixXd& forecast,
                     const Eigen::VectorXd& meas_var, const Eigen::VectorXd& y,
                     const RngKey& key, std::size_t n);

/// Writes log(mean(exp(v))) and applies the failure rule. Returns true when
/// the step failed.
bool weight_step(std::span<const double> log_weights, double& cond_loglik);

}  // namespace detail

}  // namespace spatpomp
