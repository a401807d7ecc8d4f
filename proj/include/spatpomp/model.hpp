#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spatpomp/rng.hpp"

namespace spatpomp {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// Observation times t_1 < ... < t_N with origin t0 <= t_1.
struct TimeGrid {
  double t0 = 0.0;
  std::vector<double> times;

  std::size_t size() const { return times.size(); }
  /// t_n with t_0 = t0, for n in 0..N.
  double at(std::size_t n) const { return n == 0 ? t0 : times[n - 1]; }
  void validate() const;
};

/// U x N observations; NaN marks a missing cell.
struct ObservationMatrix {
  std::vector<std::string> unit_names;
  std::vector<std::string> unit_obsnames;
  Eigen::MatrixXd values;

  std::size_t missing_count() const;
};

/// Covariate values interpolated at one time. Per-unit covariates are stored
/// covariate-major: unit(c, u) is covariate c for unit u.
struct CovariateValues {
  std::size_t units = 0;
  std::vector<double> unit_values;
  std::vector<double> shared_values;

  double unit(std::size_t covariate, std::size_t u) const {
    return unit_values[covariate * units + u];
  }
  double shared(std::size_t covariate) const { return shared_values[covariate]; }
};

/// Covariate series on a time axis. Lookups interpolate linearly between
/// rows and hold the end rows constant outside the covered range.
class CovariateTable {
 public:
  CovariateTable() = default;
  CovariateTable(std::vector<double> times, std::size_t units,
                 std::vector<std::string> unit_covariate_names,
                 std::vector<Eigen::MatrixXd> unit_series,
                 std::vector<std::string> shared_names = {},
                 std::vector<Eigen::VectorXd> shared_series = {});

  bool empty() const { return times_.empty(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<std::string>& unit_covariate_names() const { return unit_names_; }
  const std::vector<std::string>& shared_names() const { return shared_names_; }
  std::optional<std::size_t> unit_index(const std::string& name) const;
  std::optional<std::size_t> shared_index(const std::string& name) const;

  void interpolate(double t, CovariateValues& out) const;
  CovariateValues interpolate(double t) const;

  /// Table whose per-unit covariates start with `leading` in that order,
  /// followed by the remaining ones. Throws if a name is absent.
  CovariateTable reordered(const std::vector<std::string>& leading) const;

 private:
  std::vector<double> times_;
  std::size_t units_ = 0;
  std::vector<std::string> unit_names_;
  std::vector<Eigen::MatrixXd> unit_series_;  // each: units x times
  std::vector<std::string> shared_names_;
  std::vector<Eigen::VectorXd> shared_series_;
};

enum class ParamKind { Regular, InitialValue };

/// Named parameter values with a regular / initial-value classification.
class ParameterVector {
 public:
  ParameterVector() = default;

  void add(const std::string& name, double value, ParamKind kind = ParamKind::Regular);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  ParamKind kind(std::size_t i) const { return kinds_[i]; }
  bool is_ivp(std::size_t i) const { return kinds_[i] == ParamKind::InitialValue; }

  std::optional<std::size_t> index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return index_of(name).has_value(); }
  double operator[](const std::string& name) const;
  double& operator[](const std::string& name);
  double at(std::size_t i) const { return values_[i]; }
  void set(const std::string& name, double value);

 private:
  std::vector<std::string> names_;
  std::vector<double> values_;
  std::vector<ParamKind> kinds_;
  std::map<std::string, std::size_t> index_;
};

enum class Scale { Identity, Log, Logit };

enum class Direction { ToEst, FromEst };

/// Per-parameter estimation-scale transform. Parameters without a tag use
/// the identity.
class ParamTransform {
 public:
  ParamTransform() = default;
  explicit ParamTransform(std::map<std::string, Scale> tags) : tags_(std::move(tags)) {}

  void set(const std::string& name, Scale scale) { tags_[name] = scale; }
  Scale scale(const std::string& name) const;

  double to_est(const std::string& name, double value) const;
  double from_est(const std::string& name, double value) const;
  ParameterVector apply(const ParameterVector& theta, Direction direction) const;

 private:
  std::map<std::string, Scale> tags_;
};

ParameterVector transform_params(const ParamTransform& transform, const ParameterVector& theta,
                                 Direction direction);

using ThetaView = std::span<const double>;
using StateView = std::span<const double>;
using MutableState = std::span<double>;

/// Model component callbacks. Parameters arrive as a flat view ordered like
/// the model's parameter names; states as a unit-major view of length
/// U * unit_dim (unit u occupies [u * unit_dim, (u + 1) * unit_dim)).
struct ModelComponents {
  std::function<void(ThetaView theta, const CovariateValues& covar, double t0, RngStream& rng,
                     MutableState x)>
      rinit;
  /// One Euler step of length dt starting at time t.
  std::function<void(MutableState x, double t, double dt, ThetaView theta,
                     const CovariateValues& covar, RngStream& rng)>
      rprocess;
  /// Maximum Euler step. Infinite means the simulator is exact over any interval.
  double delta = std::numeric_limits<double>::infinity();

  std::function<double(double y, StateView xu, std::size_t u, double t, ThetaView theta,
                       bool give_log)>
      dunit_measure;
  std::function<double(StateView xu, std::size_t u, double t, ThetaView theta, RngStream& rng)>
      runit_measure;
  std::function<double(StateView xu, std::size_t u, double t, ThetaView theta)> eunit_measure;
  std::function<double(StateView xu, std::size_t u, double t, ThetaView theta)> vunit_measure;
  /// Writes into theta_out (pre-filled with theta) a parameter vector whose
  /// measurement variance at xu matches `variance`.
  std::function<void(StateView xu, std::size_t u, double t, double variance, ThetaView theta,
                     std::span<double> theta_out)>
      munit_measure;
  std::function<void(StateView x, double t, ThetaView theta, const CovariateValues& covar,
                     std::span<double> dxdt)>
      skeleton;

  std::vector<std::string> accumulator_names;
  /// Parameter names the components read; checked at build time.
  std::vector<std::string> required_params;
  /// Per-unit covariate names the components read, in the order they expect
  /// them in CovariateValues.
  std::vector<std::string> required_covariates;
  /// If false, a missing observation contributes log density 0 without the
  /// dunit_measure callback being consulted.
  bool handles_missing = false;
};

/// Immutable bundle of data, covariates, components and parameter layout.
class SpatPompModel {
 public:
  SpatPompModel(std::string name, TimeGrid grid, ObservationMatrix obs, CovariateTable covar,
                std::vector<std::string> unit_statenames, ModelComponents components,
                ParameterVector params, ParamTransform transform);

  const std::string& name() const { return name_; }
  std::size_t units() const { return obs_.unit_names.size(); }
  std::size_t unit_dim() const { return unit_statenames_.size(); }
  std::size_t state_dim() const { return units() * unit_dim(); }
  std::size_t num_times() const { return grid_.size(); }
  const TimeGrid& grid() const { return grid_; }
  const ObservationMatrix& obs() const { return obs_; }
  const CovariateTable& covariates() const { return covar_; }
  const std::vector<std::string>& unit_statenames() const { return unit_statenames_; }
  const ModelComponents& components() const { return components_; }
  const ParameterVector& params() const { return params_; }
  const ParamTransform& transform() const { return transform_; }
  const std::vector<std::size_t>& accumulator_indices() const { return accumulators_; }

  /// Parameter values reordered into the model's layout; every model
  /// parameter must be present in theta.
  std::vector<double> theta_vector(const ParameterVector& theta) const;
  /// Inverse of theta_vector using the model's names and kinds.
  ParameterVector to_parameter_vector(std::span<const double> theta) const;

  CovariateValues covariates_at(double t) const;

  /// Observation y_{u,n}, n in 1..N.
  double observation(std::size_t u, std::size_t n) const { return obs_.values(u, n - 1); }

  StateView unit_state(StateView x, std::size_t u) const {
    return x.subspan(u * unit_dim(), unit_dim());
  }

  void rinit(ThetaView theta, RngStream& rng, MutableState x) const;
  void reset_accumulators(MutableState x) const;
  /// Simulates from time `from` to `to` by Euler steps of equal length no
  /// larger than delta. Accumulators are zeroed first when `reset` is set
  /// and the interval is nonempty.
  void advance(MutableState x, double from, double to, bool reset, ThetaView theta,
               RngStream& rng) const;

  /// log f(y_{u,n} | x_u); missing observations give 0.
  double unit_log_density(std::size_t u, std::size_t n, StateView x, ThetaView theta) const;
  double unit_log_density_value(double y, std::size_t u, double t, StateView x,
                                ThetaView theta) const;
  /// Joint log measurement density at time n, the sum over units.
  double log_measure_density(std::size_t n, StateView x, ThetaView theta) const;

  enum class Component { Rinit, Rprocess, DunitMeasure, RunitMeasure, EunitMeasure,
                         VunitMeasure, MunitMeasure, Skeleton };
  bool has(Component c) const;
  void require(Component c, const std::string& method) const;
  static std::string component_name(Component c);

 private:
  std::string name_;
  TimeGrid grid_;
  ObservationMatrix obs_;
  CovariateTable covar_;
  std::vector<std::string> unit_statenames_;
  ModelComponents components_;
  ParameterVector params_;
  ParamTransform transform_;
  std::vector<std::size_t> accumulators_;
};

/// One long-format observation record.
struct ObsRecord {
  double time;
  std::string unit;
  double value;
};

/// One long-format covariate record: per-unit named values at a time.
struct CovariateRecord {
  double time;
  std::string unit;
  std::map<std::string, double> values;
};

struct BuildOptions {
  std::string name = "spatpomp";
  std::vector<std::string> unit_statenames;
  std::string obs_name = "y";
  /// Optional explicit unit order; defaults to order of first appearance.
  std::vector<std::string> unit_names;
  ParamTransform transform;
};

SpatPompModel build_model(const std::vector<ObsRecord>& data, double t0,
                          const std::vector<CovariateRecord>& covariates,
                          ModelComponents components, ParameterVector params,
                          const BuildOptions& options);

/// Builds a covariate table from long-format records for the given units.
CovariateTable covariates_from_records(const std::vector<CovariateRecord>& records,
                                       const std::vector<std::string>& unit_names);

struct Simulation {
  Eigen::MatrixXd states;  // state_dim x (N + 1), column 0 at t0
  Eigen::MatrixXd obs;     // U x N
};

std::vector<Simulation> simulate(const SpatPompModel& model, const ParameterVector& theta,
                                 const RngKey& key, std::size_t nsim);

/// Copy of `model` with its observations replaced.
SpatPompModel with_observations(const SpatPompModel& model, const Eigen::MatrixXd& values);

}  // namespace spatpomp
