#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spatpomp/filters.hpp"
#include "spatpomp/model.hpp"
#include "spatpomp/rng.hpp"

namespace spatpomp {

/// Random-walk intensities on the estimation scale. Every model parameter
/// must have an sd, either named or through `fallback`. IVPs are perturbed
/// once at the start of each iteration, regular parameters at every step.
struct PerturbationSpec {
  std::map<std::string, double> sd;
  std::optional<double> fallback;
  /// Overrides the model's own ivp/regular classification.
  std::map<std::string, bool> ivp;

  struct Resolved {
    std::vector<double> sd;
    std::vector<bool> ivp;
  };
  Resolved resolve(const SpatPompModel& model) const;
};

/// Geometric cooling: sd multiplier a^{m/50} at iteration m.
struct CoolingSchedule {
  double a = 0.5;

  void validate() const;
  double variance_multiplier(std::size_t m) const;
  double sd_multiplier(std::size_t m) const;
};

struct TraceRow {
  std::size_t iteration = 0;
  ParameterVector theta;
  double loglik = 0.0;
};

struct SearchResult {
  ParameterVector estimate;
  std::vector<TraceRow> trace;
  /// Final parameter swarm on the natural scale, D x (swarm size).
  Eigen::MatrixXd swarm;
  std::size_t n_failures = 0;
};

SearchResult igirf(const SpatPompModel& model, const ParameterVector& theta0, std::size_t Ngirf,
                   const GirfOptions& options, const PerturbationSpec& rw,
                   const CoolingSchedule& cooling, const RngKey& key, int threads = 1);

SearchResult ienkf(const SpatPompModel& model, const ParameterVector& theta0, std::size_t Nenkf,
                   std::size_t Np, const PerturbationSpec& rw, const CoolingSchedule& cooling,
                   const RngKey& key, int threads = 1);

struct IubfOptions {
  std::size_t Nubf = 1;
  std::size_t Nparam = 1;
  std::size_t Nrep_per_param = 1;
  double prop = 0.5;
  NeighborhoodSpec nbhd = NeighborhoodSpec::adjacent();
};

SearchResult iubf(const SpatPompModel& model, const ParameterVector& theta0,
                  const IubfOptions& options, const PerturbationSpec& rw,
                  const CoolingSchedule& cooling, const RngKey& key, int threads = 1);

namespace detail {

/// Indices of the ceil(p * r.size()) largest scores. Among equal scores the
/// lower index wins. Returned in ascending index order.
std::vector<std::size_t> select_top(const std::vector<double>& r, double p);

}  // namespace detail

struct LogMeanExp {
  double value = 0.0;
  std::optional<double> se;
};

/// log(mean(exp(v))) with an optional jackknife standard error.
LogMeanExp logmeanexp(const std::vector<double>& values, bool se = false);

struct ProfileDesign {
  std::string name;
  std::vector<double> grid;
  std::vector<ParameterVector> starts;
};

/// Starting points for a profile over `name`. Non-profiled parameters are
/// drawn uniformly on the estimation scale within the [lower, upper] box.
/// Parameters not in the box keep their value from `base`.
ProfileDesign profile_design(const std::string& name, const std::vector<double>& grid,
                             const ParameterVector& base, const ParameterVector& lower,
                             const ParameterVector& upper, const ParamTransform& transform,
                             std::size_t nprof, const RngKey& key);

struct McapResult {
  std::vector<double> grid;
  std::vector<double> smoothed;
  double maximizer = 0.0;
  double cutoff = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double se_stat = 0.0;
  double se_mc = 0.0;
  /// Set when the interval runs into an end of the grid.
  bool one_sided = false;
};

McapResult mcap(const std::vector<double>& loglik, const std::vector<double>& parameter,
                double level = 0.95, double span = 0.75, std::size_t ngrid = 1000);

}  // namespace spatpomp
