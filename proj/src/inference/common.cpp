#include <algorithm>
#include <cmath>
#include <numeric>

#include "spatpomp/errors.hpp"
#include "spatpomp/inference.hpp"
#include "spatpomp/stochastics.hpp"

namespace spatpomp {

PerturbationSpec::Resolved PerturbationSpec::resolve(const SpatPompModel& model) const {
  const auto& params = model.params();
  for (const auto& [name, value] : sd) {
    if (!params.contains(name)) throw ValidationError("rw sd given for unknown parameter '" + name + "'");
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw ValidationError("rw sd for '" + name + "' must be finite and non-negative");
    }
  }
  for (const auto& [name, flag] : ivp) {
    if (!params.contains(name)) throw ValidationError("ivp flag given for unknown parameter '" + name + "'");
  }
  if (fallback && !(*fallback >= 0.0 && std::isfinite(*fallback))) {
    throw ValidationError("default rw sd must be finite and non-negative");
  }
  Resolved out;
  std::string missing;
  for (std::size_t d = 0; d < params.size(); ++d) {
    const auto& name = params.names()[d];
    auto it = sd.find(name);
    if (it != sd.end()) {
      out.sd.push_back(it->second);
    } else if (fallback) {
      out.sd.push_back(*fallback);
    } else {
      missing += (missing.empty() ? "" : ", ") + name;
      out.sd.push_back(0.0);
    }
    auto f = ivp.find(name);
    out.ivp.push_back(f != ivp.end() ? f->second : params.is_ivp(d));
  }
  if (!missing.empty()) throw ValidationError("rw sd missing for parameter(s): " + missing);
  return out;
}

void CoolingSchedule::validate() const {
  if (!(a > 0.0 && a <= 1.0)) throw ValidationError("cooling fraction must lie in (0, 1]");
}

double CoolingSchedule::variance_multiplier(std::size_t m) const {
  return std::pow(a, 2.0 * static_cast<double>(m) / 50.0);
}

double CoolingSchedule::sd_multiplier(std::size_t m) const {
  return std::pow(a, static_cast<double>(m) / 50.0);
}

namespace detail {

std::vector<std::size_t> select_top(const std::vector<double>& r, double p) {
  const std::size_t n = r.size();
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("selection proportion must lie in (0, 1]");
  const double want = p * static_cast<double>(n);
  if (want < 1.0) throw ValidationError("prop * Nparam must be at least 1");
  const auto keep = std::min(n, static_cast<std::size_t>(std::ceil(want - 1e-9)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto score = [&](std::size_t k) { return std::isnan(r[k]) ? -INFINITY : r[k]; };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score(a) > score(b); });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace detail

LogMeanExp logmeanexp(const std::vector<double>& values, bool se) {
  if (values.empty()) throw ValidationError("logmeanexp requires at least one value");
  LogMeanExp out;
  out.value = log_mean_exp(values);
  if (se) {
    const std::size_t n = values.size();
    if (n < 2) throw ValidationError("logmeanexp standard error requires at least two values");
    std::vector<double> jk(n);
    std::vector<double> rest(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t w = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (k != i) rest[w++] = values[k];
      }
      jk[i] = log_mean_exp(rest);
    }
    const double mean = std::accumulate(jk.begin(), jk.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : jk) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    out.se = static_cast<double>(n - 1) * sd / std::sqrt(static_cast<double>(n));
  }
  return out;
}

}  // namespace spatpomp
