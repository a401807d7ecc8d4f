#include "spatpomp/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "spatpomp/errors.hpp"

namespace spatpomp {

void TimeGrid::validate() const {
  if (times.empty()) throw StructuralError("time grid must contain at least one observation time");
  if (t0 > times.front()) throw StructuralError("t0 must not exceed the first observation time");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw StructuralError("observation times must be strictly increasing");
    }
  }
}

std::size_t ObservationMatrix::missing_count() const {
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (is_missing(values.data()[i])) ++count;
  }
  return count;
}

// ---------------------------------------------------------------------------
// Covariates

CovariateTable::CovariateTable(std::vector<double> times, std::size_t units,
                               std::vector<std::string> unit_covariate_names,
                               std::vector<Eigen::MatrixXd> unit_series,
                               std::vector<std::string> shared_names,
                               std::vector<Eigen::VectorXd> shared_series)
    : times_(std::move(times)),
      units_(units),
      unit_names_(std::move(unit_covariate_names)),
      unit_series_(std::move(unit_series)),
      shared_names_(std::move(shared_names)),
      shared_series_(std::move(shared_series)) {
  if (unit_names_.size() != unit_series_.size() || shared_names_.size() != shared_series_.size()) {
    throw StructuralError("covariate names and series differ in count");
  }
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) {
      throw StructuralError("covariate times must be strictly increasing");
    }
  }
  for (const auto& m : unit_series_) {
    if (static_cast<std::size_t>(m.rows()) != units_ ||
        static_cast<std::size_t>(m.cols()) != times_.size()) {
      throw StructuralError("per-unit covariate series has wrong shape");
    }
  }
  for (const auto& v : shared_series_) {
    if (static_cast<std::size_t>(v.size()) != times_.size()) {
      throw StructuralError("shared covariate series has wrong length");
    }
  }
}

std::optional<std::size_t> CovariateTable::unit_index(const std::string& name) const {
  auto it = std::find(unit_names_.begin(), unit_names_.end(), name);
  if (it == unit_names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - unit_names_.begin());
}

std::optional<std::size_t> CovariateTable::shared_index(const std::string& name) const {
  auto it = std::find(shared_names_.begin(), shared_names_.end(), name);
  if (it == shared_names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - shared_names_.begin());
}

void CovariateTable::interpolate(double t, CovariateValues& out) const {
  out.units = units_;
  out.unit_values.resize(unit_series_.size() * units_);
  out.shared_values.resize(shared_series_.size());
  if (times_.empty()) return;

  std::size_t lo = 0;
  std::size_t hi = 0;
  double frac = 0.0;
  if (t <= times_.front()) {
    lo = hi = 0;
  } else if (t >= times_.back()) {
    lo = hi = times_.size() - 1;
  } else {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    hi = static_cast<std::size_t>(it - times_.begin());
    lo = hi - 1;
    frac = (t - times_[lo]) / (times_[hi] - times_[lo]);
  }
  for (std::size_t c = 0; c < unit_series_.size(); ++c) {
    const auto& m = unit_series_[c];
    for (std::size_t u = 0; u < units_; ++u) {
      const double a = m(u, lo);
      out.unit_values[c * units_ + u] = lo == hi ? a : a + frac * (m(u, hi) - a);
    }
  }
  for (std::size_t c = 0; c < shared_series_.size(); ++c) {
    const auto& v = shared_series_[c];
    const double a = v[lo];
    out.shared_values[c] = lo == hi ? a : a + frac * (v[hi] - a);
  }
}

CovariateTable CovariateTable::reordered(const std::vector<std::string>& leading) const {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> series;
  for (const auto& name : leading) {
    auto i = unit_index(name);
    if (!i) {
      throw ValidationError("covariate lookup failed: '" + name + "' is not in the covariate table");
    }
    names.push_back(name);
    series.push_back(unit_series_[*i]);
  }
  for (std::size_t c = 0; c < unit_names_.size(); ++c) {
    if (std::find(leading.begin(), leading.end(), unit_names_[c]) != leading.end()) continue;
    names.push_back(unit_names_[c]);
    series.push_back(unit_series_[c]);
  }
  return CovariateTable(times_, units_, std::move(names), std::move(series), shared_names_,
                        shared_series_);
}

CovariateValues CovariateTable::interpolate(double t) const {
  CovariateValues out;
  interpolate(t, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parameters

void ParameterVector::add(const std::string& name, double value, ParamKind kind) {
  if (index_.count(name)) throw ValidationError("duplicate parameter name '" + name + "'");
  index_[name] = names_.size();
  names_.push_back(name);
  values_.push_back(value);
  kinds_.push_back(kind);
}

std::optional<std::size_t> ParameterVector::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double ParameterVector::operator[](const std::string& name) const {
  auto i = index_of(name);
  if (!i) throw ValidationError("unknown parameter '" + name + "'");
  return values_[*i];
}

double& ParameterVector::operator[](const std::string& name) {
  auto i = index_of(name);
  if (!i) throw ValidationError("unknown parameter '" + name + "'");
  return values_[*i];
}

void ParameterVector::set(const std::string& name, double value) { (*this)[name] = value; }

Scale ParamTransform::scale(const std::string& name) const {
  auto it = tags_.find(name);
  return it == tags_.end() ? Scale::Identity : it->second;
}

double ParamTransform::to_est(const std::string& name, double value) const {
  switch (scale(name)) {
    case Scale::Identity:
      return value;
    case Scale::Log:
      if (!(value > 0.0)) {
        throw ValidationError("parameter '" + name + "' must be positive for a log transform");
      }
      return std::log(value);
    case Scale::Logit:
      if (!(value > 0.0 && value < 1.0)) {
        throw ValidationError("parameter '" + name + "' must lie in (0,1) for a logit transform");
      }
      return std::log(value) - std::log1p(-value);
  }
  return value;
}

double ParamTransform::from_est(const std::string& name, double value) const {
  switch (scale(name)) {
    case Scale::Identity:
      return value;
    case Scale::Log:
      return std::exp(value);
    case Scale::Logit:
      return value >= 0.0 ? 1.0 / (1.0 + std::exp(-value))
                          : std::exp(value) / (1.0 + std::exp(value));
  }
  return value;
}

ParameterVector ParamTransform::apply(const ParameterVector& theta, Direction direction) const {
  ParameterVector out = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const auto& name = theta.names()[i];
    out.values()[i] = direction == Direction::ToEst ? to_est(name, theta.at(i))
                                                    : from_est(name, theta.at(i));
  }
  return out;
}

ParameterVector transform_params(const ParamTransform& transform, const ParameterVector& theta,
                                 Direction direction) {
  return transform.apply(theta, direction);
}

// ---------------------------------------------------------------------------
// Model

SpatPompModel::SpatPompModel(std::string name, TimeGrid grid, ObservationMatrix obs,
                             CovariateTable covar, std::vector<std::string> unit_statenames,
                             ModelComponents components, ParameterVector params,
                             ParamTransform transform)
    : name_(std::move(name)),
      grid_(std::move(grid)),
      obs_(std::move(obs)),
      covar_(std::move(covar)),
      unit_statenames_(std::move(unit_statenames)),
      components_(std::move(components)),
      params_(std::move(params)),
      transform_(std::move(transform)) {
  grid_.validate();
  if (obs_.unit_names.empty()) throw StructuralError("model needs at least one unit");
  if (static_cast<std::size_t>(obs_.values.rows()) != obs_.unit_names.size() ||
      static_cast<std::size_t>(obs_.values.cols()) != grid_.size()) {
    throw StructuralError("observation matrix dimensions do not match units x times");
  }
  if (unit_statenames_.empty()) throw ValidationError("model needs at least one unit state name");
  for (const auto& acc : components_.accumulator_names) {
    auto it = std::find(unit_statenames_.begin(), unit_statenames_.end(), acc);
    if (it == unit_statenames_.end()) {
      throw ValidationError("accumulator '" + acc + "' is not a unit state name");
    }
    accumulators_.push_back(static_cast<std::size_t>(it - unit_statenames_.begin()));
  }
  for (const auto& p : components_.required_params) {
    if (!params_.contains(p)) {
      throw ValidationError("model component references unknown parameter '" + p + "'");
    }
  }
  if (!components_.required_covariates.empty()) {
    covar_ = covar_.reordered(components_.required_covariates);
  }
  if (!(components_.delta > 0.0)) throw ValidationError("Euler step delta must be positive");
}

std::vector<double> SpatPompModel::theta_vector(const ParameterVector& theta) const {
  std::vector<double> out(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto j = theta.index_of(params_.names()[i]);
    if (!j) throw ValidationError("parameter '" + params_.names()[i] + "' is missing");
    out[i] = theta.at(*j);
  }
  return out;
}

ParameterVector SpatPompModel::to_parameter_vector(std::span<const double> theta) const {
  ParameterVector out = params_;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = theta[i];
  return out;
}

CovariateValues SpatPompModel::covariates_at(double t) const { return covar_.interpolate(t); }

void SpatPompModel::rinit(ThetaView theta, RngStream& rng, MutableState x) const {
  require(Component::Rinit, "rinit");
  components_.rinit(theta, covariates_at(grid_.t0), grid_.t0, rng, x);
}

void SpatPompModel::reset_accumulators(MutableState x) const {
  const std::size_t k = unit_dim();
  for (std::size_t u = 0; u < units(); ++u) {
    for (std::size_t a : accumulators_) x[u * k + a] = 0.0;
  }
}

void SpatPompModel::advance(MutableState x, double from, double to, bool reset, ThetaView theta,
                            RngStream& rng) const {
  if (!(to > from)) return;
  if (reset) reset_accumulators(x);
  const double span = to - from;
  std::size_t steps = 1;
  if (std::isfinite(components_.delta)) {
    const double ratio = span / components_.delta;
    steps = static_cast<std::size_t>(std::max(1.0, std::ceil(ratio - 1e-9)));
  }
  const double dt = span / static_cast<double>(steps);
  CovariateValues covar;
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = from + dt * static_cast<double>(s);
    covar_.interpolate(t, covar);
    components_.rprocess(x, t, dt, theta, covar, rng);
  }
}

double SpatPompModel::unit_log_density_value(double y, std::size_t u, double t, StateView x,
                                             ThetaView theta) const {
  if (is_missing(y) && !components_.handles_missing) return 0.0;
  return components_.dunit_measure(y, unit_state(x, u), u, t, theta, true);
}

double SpatPompModel::unit_log_density(std::size_t u, std::size_t n, StateView x,
                                       ThetaView theta) const {
  return unit_log_density_value(observation(u, n), u, grid_.at(n), x, theta);
}

double SpatPompModel::log_measure_density(std::size_t n, StateView x, ThetaView theta) const {
  double total = 0.0;
  for (std::size_t u = 0; u < units(); ++u) total += unit_log_density(u, n, x, theta);
  return total;
}

bool SpatPompModel::has(Component c) const {
  switch (c) {
    case Component::Rinit: return static_cast<bool>(components_.rinit);
    case Component::Rprocess: return static_cast<bool>(components_.rprocess);
    case Component::DunitMeasure: return static_cast<bool>(components_.dunit_measure);
    case Component::RunitMeasure: return static_cast<bool>(components_.runit_measure);
    case Component::EunitMeasure: return static_cast<bool>(components_.eunit_measure);
    case Component::VunitMeasure: return static_cast<bool>(components_.vunit_measure);
    case Component::MunitMeasure: return static_cast<bool>(components_.munit_measure);
    case Component::Skeleton: return static_cast<bool>(components_.skeleton);
  }
  return false;
}

std::string SpatPompModel::component_name(Component c) {
  switch (c) {
    case Component::Rinit: return "rinit";
    case Component::Rprocess: return "rprocess";
    case Component::DunitMeasure: return "dunit_measure";
    case Component::RunitMeasure: return "runit_measure";
    case Component::EunitMeasure: return "eunit_measure";
    case Component::VunitMeasure: return "vunit_measure";
    case Component::MunitMeasure: return "munit_measure";
    case Component::Skeleton: return "skeleton";
  }
  return "unknown";
}

void SpatPompModel::require(Component c, const std::string& method) const {
  if (!has(c)) throw CapabilityError(method, component_name(c));
}

// ---------------------------------------------------------------------------
// Construction from long-format records

CovariateTable covariates_from_records(const std::vector<CovariateRecord>& records,
                                       const std::vector<std::string>& unit_names) {
  if (records.empty()) return CovariateTable{};
  std::vector<double> times;
  for (const auto& r : records) times.push_back(r.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  std::vector<std::string> names;
  for (const auto& [name, value] : records.front().values) names.push_back(name);

  const std::size_t units = unit_names.size();
  std::vector<Eigen::MatrixXd> series(
      names.size(),
      Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(units),
                                static_cast<Eigen::Index>(times.size()), kMissing));
  for (const auto& r : records) {
    auto uit = std::find(unit_names.begin(), unit_names.end(), r.unit);
    if (uit == unit_names.end()) continue;
    const auto u = static_cast<Eigen::Index>(uit - unit_names.begin());
    const auto ti = static_cast<Eigen::Index>(
        std::lower_bound(times.begin(), times.end(), r.time) - times.begin());
    for (std::size_t c = 0; c < names.size(); ++c) {
      auto it = r.values.find(names[c]);
      if (it == r.values.end()) {
        throw StructuralError("covariate record lacks column '" + names[c] + "'");
      }
      series[c](u, ti) = it->second;
    }
  }
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (series[c].array().isNaN().any()) {
      throw StructuralError("covariate '" + names[c] + "' is not defined for every unit and time");
    }
  }
  return CovariateTable(std::move(times), units, std::move(names), std::move(series));
}

SpatPompModel build_model(const std::vector<ObsRecord>& data, double t0,
                          const std::vector<CovariateRecord>& covariates,
                          ModelComponents components, ParameterVector params,
                          const BuildOptions& options) {
  if (data.empty()) throw StructuralError("no observation records");

  std::vector<std::string> units = options.unit_names;
  if (units.empty()) {
    for (const auto& r : data) {
      if (std::find(units.begin(), units.end(), r.unit) == units.end()) units.push_back(r.unit);
    }
  }
  std::vector<double> times;
  for (const auto& r : data) times.push_back(r.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  const auto U = static_cast<Eigen::Index>(units.size());
  const auto N = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd values = Eigen::MatrixXd::Constant(U, N, kMissing);
  Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(U, N);
  for (const auto& r : data) {
    auto uit = std::find(units.begin(), units.end(), r.unit);
    if (uit == units.end()) throw StructuralError("record for unlisted unit '" + r.unit + "'");
    const auto u = static_cast<Eigen::Index>(uit - units.begin());
    const auto n = static_cast<Eigen::Index>(
        std::lower_bound(times.begin(), times.end(), r.time) - times.begin());
    if (seen(u, n)) {
      std::ostringstream msg;
      msg << "duplicate record for unit '" << r.unit << "' at time " << r.time;
      throw StructuralError(msg.str());
    }
    seen(u, n) = 1;
    values(u, n) = r.value;
  }
  if ((seen.array() == 0).any()) {
    throw StructuralError("data do not form a common grid: some unit lacks a record at some time");
  }

  TimeGrid grid{t0, std::move(times)};
  ObservationMatrix obs{units, {options.obs_name}, std::move(values)};
  CovariateTable covar = covariates_from_records(covariates, units);
  return SpatPompModel(options.name, std::move(grid), std::move(obs), std::move(covar),
                       options.unit_statenames, std::move(components), std::move(params),
                       options.transform);
}

SpatPompModel with_observations(const SpatPompModel& model, const Eigen::MatrixXd& values) {
  ObservationMatrix obs = model.obs();
  obs.values = values;
  return SpatPompModel(model.name(), model.grid(), std::move(obs), model.covariates(),
                       model.unit_statenames(), model.components(), model.params(),
                       model.transform());
}

std::vector<Simulation> simulate(const SpatPompModel& model, const ParameterVector& theta,
                                 const RngKey& key, std::size_t nsim) {
  model.require(SpatPompModel::Component::Rinit, "simulate");
  model.require(SpatPompModel::Component::Rprocess, "simulate");
  model.require(SpatPompModel::Component::RunitMeasure, "simulate");
  const std::vector<double> th = model.theta_vector(theta);
  const std::size_t N = model.num_times();
  const std::size_t U = model.units();
  const std::size_t dim = model.state_dim();

  std::vector<Simulation> out;
  out.reserve(nsim);
  for (std::size_t s = 0; s < nsim; ++s) {
    const RngKey k = key.with_replicate(key.replicate + s);
    Simulation sim;
    sim.states.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(N + 1));
    sim.obs.resize(static_cast<Eigen::Index>(U), static_cast<Eigen::Index>(N));
    std::vector<double> x(dim, 0.0);
    RngStream init = k.stream(0, 0, Channel::Init);
    model.rinit(th, init, x);
    for (std::size_t i = 0; i < dim; ++i) sim.states(static_cast<Eigen::Index>(i), 0) = x[i];
    for (std::size_t n = 1; n <= N; ++n) {
      RngStream proc = k.stream(0, n, Channel::Process);
      model.advance(x, model.grid().at(n - 1), model.grid().at(n), true, th, proc);
      for (std::size_t i = 0; i < dim; ++i) {
        sim.states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) = x[i];
      }
      RngStream meas = k.stream(0, n, Channel::Measure);
      for (std::size_t u = 0; u < U; ++u) {
        sim.obs(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(n - 1)) =
            model.components().runit_measure(model.unit_state(x, u), u, model.grid().at(n), th,
                                             meas);
      }
    }
    out.push_back(std::move(sim));
  }
  return out;
}

}  // namespace spatpomp
