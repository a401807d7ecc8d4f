#include <cmath>
#include <limits>

#include "est_scale.hpp"
#include "spatpomp/errors.hpp"
#include "spatpomp/inference.hpp"
#include "spatpomp/parallel.hpp"
#include "spatpomp/stochastics.hpp"

namespace spatpomp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

SearchResult iubf(const SpatPompModel& model, const ParameterVector& theta0,
                  const IubfOptions& options, const PerturbationSpec& rw,
                  const CoolingSchedule& cooling, const RngKey& key, int threads) {
  using C = SpatPompModel::Component;
  model.require(C::Rinit, "iubf");
  model.require(C::Rprocess, "iubf");
  model.require(C::DunitMeasure, "iubf");
  if (options.Nubf < 1) throw ValidationError("iubf: Nubf must be at least 1");
  if (options.Nparam < 1) throw ValidationError("iubf: Nparam must be at least 1");
  if (options.Nrep_per_param < 1) throw ValidationError("iubf: Nrep_per_param must be at least 1");
  if (!(options.prop > 0.0 && options.prop <= 1.0)) {
    throw ValidationError("iubf: prop must lie in (0, 1]");
  }
  if (options.prop * static_cast<double>(options.Nparam) < 1.0) {
    throw ValidationError("iubf: prop * Nparam must be at least 1");
  }
  cooling.validate();
  const auto spec = rw.resolve(model);
  const detail::EstScale es(model);
  const std::size_t D = es.size();
  const std::size_t N = model.num_times();
  const std::size_t U = model.units();
  const std::size_t dim = model.state_dim();
  const std::size_t KT = options.Nparam;
  const std::size_t R = options.Nrep_per_param;
  const std::size_t KR = KT * R;
  options.nbhd.validate(U, N);

  std::vector<std::vector<SpaceTimePoint>> hood(U * (N + 1));
  for (std::size_t n = 1; n <= N; ++n) {
    for (std::size_t u = 0; u < U; ++u) hood[n * U + u] = options.nbhd.points(u, n);
  }

  // Candidate parameters on the estimation scale, KT x D.
  std::vector<double> cand(KT * D);
  const auto th0 = model.theta_vector(theta0);
  for (std::size_t k = 0; k < KT; ++k) {
    for (std::size_t d = 0; d < D; ++d) cand[k * D + d] = es.to(d, th0[d]);
  }

  std::vector<double> X(KR * dim), X_next(KR * dim);
  std::vector<double> pert(KR * D);
  std::vector<double> natural(KR * D);
  // Log unit weights per (k, r), indexed [time][u].
  const std::size_t hist = N * U;
  std::vector<double> lw(KR * hist), lw_next(KR * hist);
  std::vector<double> score(KT);

  SearchResult result;
  for (std::size_t m = 1; m <= options.Nubf; ++m) {
    const RngKey keym = key.child(m);
    const double sdm = cooling.sd_multiplier(m);
    std::fill(lw.begin(), lw.end(), 0.0);

    parallel_for(KR, threads, [&](std::size_t i) {
      const std::size_t k = i / R;
      for (std::size_t d = 0; d < D; ++d) natural[i * D + d] = es.from(d, cand[k * D + d]);
      RngStream rng = keym.stream(i, 0, Channel::Init);
      model.rinit(ThetaView(natural.data() + i * D, D), rng, MutableState(X.data() + i * dim, dim));
    });

    double loglik = 0.0;
    for (std::size_t n = 1; n <= N; ++n) {
      const double from = model.grid().at(n - 1);
      const double to = model.grid().at(n);
      parallel_for(KR, threads, [&](std::size_t i) {
        const std::size_t k = i / R;
        RngStream prng = keym.stream(i, n, Channel::Perturb);
        for (std::size_t d = 0; d < D; ++d) {
          double v = cand[k * D + d];
          if (!spec.ivp[d] && spec.sd[d] > 0.0) v += sdm * spec.sd[d] * prng.normal();
          pert[i * D + d] = v;
          natural[i * D + d] = es.from(d, v);
        }
        const ThetaView th(natural.data() + i * D, D);
        MutableState x(X.data() + i * dim, dim);
        RngStream rng = keym.stream(i, n, Channel::Process);
        model.advance(x, from, to, true, th, rng);
        double* w = lw.data() + i * hist + (n - 1) * U;
        for (std::size_t u = 0; u < U; ++u) {
          const double ld = model.unit_log_density(u, n, x, th);
          w[u] = std::isnan(ld) ? kNegInf : ld;
        }
      });

      parallel_for(KT, threads, [&](std::size_t k) {
        std::vector<double> lp(R), num(R);
        double total = 0.0;
        for (std::size_t u = 0; u < U; ++u) {
          for (std::size_t r = 0; r < R; ++r) {
            const double* w = lw.data() + (k * R + r) * hist;
            double s = 0.0;
            for (const auto& [v, mm] : hood[n * U + u]) s += w[(mm - 1) * U + v];
            lp[r] = std::isnan(s) ? kNegInf : s;
            const double t = lp[r] + w[(n - 1) * U + u];
            num[r] = std::isnan(t) ? kNegInf : t;
          }
          const double term = log_sum_exp(num) - log_sum_exp(lp);
          total += std::isnan(term) ? kNegInf : term;
        }
        score[k] = total;
      });
      double mean_score = 0.0;
      for (double s : score) mean_score += s;
      loglik += mean_score / static_cast<double>(KT);

      const auto survivors = detail::select_top(score, options.prop);
      std::vector<double> next_cand(KT * D, 0.0);
      for (std::size_t k = 0; k < KT; ++k) {
        const auto pos = static_cast<std::size_t>(
            std::ceil(options.prop * static_cast<double>(k + 1) - 1e-9));
        const std::size_t src = survivors[std::min(pos, survivors.size()) - 1];
        for (std::size_t r = 0; r < R; ++r) {
          const std::size_t from_i = src * R + r;
          const std::size_t to_i = k * R + r;
          std::copy_n(X.data() + from_i * dim, dim, X_next.data() + to_i * dim);
          std::copy_n(lw.data() + from_i * hist, hist, lw_next.data() + to_i * hist);
          for (std::size_t d = 0; d < D; ++d) next_cand[k * D + d] += pert[from_i * D + d];
        }
        for (std::size_t d = 0; d < D; ++d) next_cand[k * D + d] /= static_cast<double>(R);
      }
      X.swap(X_next);
      lw.swap(lw_next);
      cand.swap(next_cand);
    }

    std::vector<double> mean(D, 0.0);
    for (std::size_t k = 0; k < KT; ++k) {
      for (std::size_t d = 0; d < D; ++d) mean[d] += cand[k * D + d];
    }
    for (std::size_t d = 0; d < D; ++d) mean[d] = es.from(d, mean[d] / static_cast<double>(KT));
    result.trace.push_back({m, model.to_parameter_vector(mean), loglik});
  }
  result.estimate = result.trace.back().theta;
  result.swarm.resize(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(KT));
  for (std::size_t k = 0; k < KT; ++k) {
    for (std::size_t d = 0; d < D; ++d) {
      result.swarm(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) =
          es.from(d, cand[k * D + d]);
    }
  }
  return result;
}

}  // namespace spatpomp
