#include <cmath>
#include <limits>

#include "spatpomp/errors.hpp"
#include "spatpomp/filters.hpp"
#include "spatpomp/parallel.hpp"
#include "spatpomp/stochastics.hpp"

namespace spatpomp {

namespace {

// Particle filter with per-block resampling. A single block holding every
// unit is the ordinary bootstrap filter; both entry points share this path so
// that they consume random numbers identically.
FilterResult block_filter(const SpatPompModel& model, const ParameterVector& theta,
                          std::size_t Np, const BlockPartition& partition, const RngKey& key,
                          int threads, const std::string& method) {
  using C = SpatPompModel::Component;
  model.require(C::Rinit, method);
  model.require(C::Rprocess, method);
  model.require(C::DunitMeasure, method);
  if (Np < 1) throw ValidationError(method + ": Np must be at least 1");
  const std::size_t U = model.units();
  partition.validate(U);

  const auto th = model.theta_vector(theta);
  const std::size_t N = model.num_times();
  const std::size_t dim = model.state_dim();
  const std::size_t K = model.unit_dim();
  const std::size_t B = partition.blocks.size();
  std::vector<std::size_t> block_of(U);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t u : partition.blocks[b]) block_of[u] = b;
  }

  std::vector<double> X(Np * dim);
  std::vector<double> next(Np * dim);
  std::vector<std::vector<double>> logw(B, std::vector<double>(Np));

  parallel_for(Np, threads, [&](std::size_t j) {
    RngStream rng = key.stream(j, 0, Channel::Init);
    model.rinit(th, rng, MutableState(X.data() + j * dim, dim));
  });

  FilterResult result;
  for (std::size_t n = 1; n <= N; ++n) {
    const double from = model.grid().at(n - 1);
    const double to = model.grid().at(n);
    parallel_for(Np, threads, [&](std::size_t j) {
      MutableState x(X.data() + j * dim, dim);
      RngStream rng = key.stream(j, n, Channel::Process);
      model.advance(x, from, to, true, th, rng);
      for (std::size_t b = 0; b < B; ++b) logw[b][j] = 0.0;
      for (std::size_t u = 0; u < U; ++u) {
        double ld = model.unit_log_density(u, n, x, th);
        if (std::isnan(ld)) ld = -std::numeric_limits<double>::infinity();
        logw[block_of[u]][j] += ld;
      }
    });

    next = X;
    double cond = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      double c = 0.0;
      if (detail::weight_step(logw[b], c)) {
        ++result.n_failures;
        cond += c;
        continue;
      }
      cond += c;
      RngStream rng = key.stream(b, n, Channel::Resample);
      const auto anc = systematic_resample_log(logw[b], rng);
      for (std::size_t j = 0; j < Np; ++j) {
        const double* src = X.data() + anc[j] * dim;
        double* dst = next.data() + j * dim;
        for (std::size_t u : partition.blocks[b]) {
          std::copy(src + u * K, src + (u + 1) * K, dst + u * K);
        }
      }
    }
    X.swap(next);
    result.cond_loglik.push_back(cond);
    result.loglik += cond;
  }

  result.filter_particles = Eigen::Map<Eigen::MatrixXd>(X.data(), static_cast<Eigen::Index>(dim),
                                                        static_cast<Eigen::Index>(Np));
  return result;
}

}  // namespace

FilterResult pfilter(const SpatPompModel& model, const ParameterVector& theta, std::size_t Np,
                     const RngKey& key, int threads) {
  return block_filter(model, theta, Np, BlockPartition::by_size(model.units(), model.units()),
                      key, threads, "pfilter");
}

FilterResult bpfilter(const SpatPompModel& model, const ParameterVector& theta, std::size_t Np,
                      const BlockPartition& blocks, const RngKey& key, int threads) {
  return block_filter(model, theta, Np, blocks, key, threads, "bpfilter");
}

}  // namespace spatpomp
