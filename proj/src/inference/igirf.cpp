#include <cmath>

#include "est_scale.hpp"
#include "spatpomp/errors.hpp"
#include "spatpomp/inference.hpp"
#include "spatpomp/parallel.hpp"

namespace spatpomp {

SearchResult igirf(const SpatPompModel& model, const ParameterVector& theta0, std::size_t Ngirf,
                   const GirfOptions& options, const PerturbationSpec& rw,
                   const CoolingSchedule& cooling, const RngKey& key, int threads) {
  if (Ngirf < 1) throw ValidationError("igirf: Ngirf must be at least 1");
  options.validate(model.num_times());
  cooling.validate();
  const auto spec = rw.resolve(model);
  const detail::EstScale es(model);
  const std::size_t J = options.Np;
  const std::size_t S = options.Ninter;
  const std::size_t D = es.size();

  const auto th0 = model.theta_vector(theta0);
  std::vector<double> swarm;
  swarm.reserve(J * D);
  for (std::size_t j = 0; j < J; ++j) swarm.insert(swarm.end(), th0.begin(), th0.end());

  SearchResult result;
  for (std::size_t m = 1; m <= Ngirf; ++m) {
    const RngKey keym = key.child(m);
    const double sdm = cooling.sd_multiplier(m);
    const double step_sd = sdm / std::sqrt(static_cast<double>(S));

    auto jitter = [&](std::size_t j, std::uint64_t time, bool ivp_pass, double scale) {
      RngStream rng = keym.stream(j, time, Channel::Perturb);
      double* th = swarm.data() + j * D;
      for (std::size_t d = 0; d < D; ++d) {
        if (spec.ivp[d] != ivp_pass || spec.sd[d] == 0.0) continue;
        th[d] = es.from(d, es.to(d, th[d]) + scale * spec.sd[d] * rng.normal());
      }
    };

    parallel_for(J, threads, [&](std::size_t j) { jitter(j, 0, true, sdm); });
    auto perturb = [&](std::size_t n, std::size_t s, std::vector<double>&) {
      parallel_for(J, threads, [&](std::size_t j) { jitter(j, n * S + s, false, step_sd); });
    };

    const FilterResult fr = detail::girf_engine(model, swarm, options, keym, threads, perturb);
    result.n_failures += fr.n_failures;
    result.trace.push_back(
        {m, model.to_parameter_vector(detail::est_mean(es, swarm, J)), fr.loglik});
  }
  result.estimate = result.trace.back().theta;
  result.swarm = detail::swarm_matrix(swarm, D, J);
  return result;
}

}  // namespace spatpomp
