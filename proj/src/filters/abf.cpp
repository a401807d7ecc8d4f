#include <algorithm>
#include <cmath>
#include <limits>

#include "spatpomp/errors.hpp"
#include "spatpomp/filters.hpp"
#include "spatpomp/parallel.hpp"
#include "spatpomp/stochastics.hpp"

namespace spatpomp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

FilterResult abf(const SpatPompModel& model, const ParameterVector& theta, std::size_t Nrep,
                 std::size_t Np, const NeighborhoodSpec& nbhd, const RngKey& key, int threads) {
  using C = SpatPompModel::Component;
  model.require(C::Rinit, "abf");
  model.require(C::Rprocess, "abf");
  model.require(C::DunitMeasure, "abf");
  if (Nrep < 1) throw ValidationError("abf: Nrep must be at least 1");
  if (Np < 1) throw ValidationError("abf: Np must be at least 1");
  const std::size_t N = model.num_times();
  const std::size_t U = model.units();
  const std::size_t dim = model.state_dim();
  const std::size_t K = model.unit_dim();
  nbhd.validate(U, N);

  std::vector<std::vector<SpaceTimePoint>> hood(U * (N + 1));
  for (std::size_t n = 1; n <= N; ++n) {
    for (std::size_t u = 0; u < U; ++u) hood[n * U + u] = nbhd.points(u, n);
  }

  const auto th = model.theta_vector(theta);
  const std::size_t R = Nrep;
  const std::size_t J = Np;
  // Log unit weights indexed [r][n-1][j][u].
  const std::size_t per_time = J * U;
  const std::size_t per_rep = N * per_time;
  std::vector<double> lw(R * per_rep);
  std::vector<double> final_proposals(R * J * dim);
  std::vector<std::size_t> rep_failures(R, 0);

  parallel_for(R, threads, [&](std::size_t r) {
    std::vector<double> xf(dim);
    std::vector<double> proposals(J * dim);
    std::vector<double> adapted(J);
    RngStream init = key.stream(r, 0, Channel::Init);
    model.rinit(th, init, xf);
    for (std::size_t n = 1; n <= N; ++n) {
      double* w = lw.data() + r * per_rep + (n - 1) * per_time;
      for (std::size_t j = 0; j < J; ++j) {
        MutableState x(proposals.data() + j * dim, dim);
        std::copy(xf.begin(), xf.end(), x.begin());
        RngStream rng = key.stream(r * J + j, n, Channel::Process);
        model.advance(x, model.grid().at(n - 1), model.grid().at(n), true, th, rng);
        double total = 0.0;
        for (std::size_t u = 0; u < U; ++u) {
          double ld = model.unit_log_density(u, n, x, th);
          if (std::isnan(ld)) ld = kNegInf;
          w[j * U + u] = ld;
          total += ld;
        }
        adapted[j] = std::isnan(total) ? kNegInf : total;
      }
      std::size_t pick = 0;
      double ignored = 0.0;
      if (detail::weight_step(adapted, ignored)) {
        ++rep_failures[r];
      } else {
        RngStream rng = key.stream(r, n, Channel::Resample);
        pick = sample_one_log(adapted, rng);
      }
      std::copy_n(proposals.data() + pick * dim, dim, xf.begin());
      if (n == N) {
        std::copy(proposals.begin(), proposals.end(), final_proposals.begin() + r * J * dim);
      }
    }
  });

  FilterResult result;
  for (std::size_t f : rep_failures) result.n_failures += f;
  result.unit_cond_loglik.resize(static_cast<Eigen::Index>(U), static_cast<Eigen::Index>(N));
  result.cond_loglik.assign(N, 0.0);

  const double floor = std::log(kWeightTolerance);
  std::vector<double> log_lp(R * J);
  std::vector<double> numer(R * J);
  std::vector<double> inner(J);
  for (std::size_t n = 1; n <= N; ++n) {
    for (std::size_t u = 0; u < U; ++u) {
      const auto& pts = hood[n * U + u];
      for (std::size_t r = 0; r < R; ++r) {
        const double* base = lw.data() + r * per_rep;
        // Earlier times: log of the particle mean of the neighborhood product.
        double past = 0.0;
        for (std::size_t m = 1; m < n; ++m) {
          bool any = false;
          std::fill(inner.begin(), inner.end(), 0.0);
          for (const auto& [v, mm] : pts) {
            if (mm != m) continue;
            any = true;
            for (std::size_t j = 0; j < J; ++j) inner[j] += base[(m - 1) * per_time + j * U + v];
          }
          if (any) past += log_mean_exp(inner);
        }
        for (std::size_t j = 0; j < J; ++j) {
          double current = 0.0;
          for (const auto& [v, mm] : pts) {
            if (mm == n) current += base[(n - 1) * per_time + j * U + v];
          }
          const double lp = past + current;
          log_lp[r * J + j] = std::isnan(lp) ? kNegInf : lp;
          const double num = log_lp[r * J + j] + base[(n - 1) * per_time + j * U + u];
          numer[r * J + j] = std::isnan(num) ? kNegInf : num;
        }
      }
      const double denom = log_sum_exp(log_lp);
      double lambda = log_sum_exp(numer) - denom;
      if (!(lambda >= floor) || !std::isfinite(denom)) {
        lambda = floor;
        ++result.n_failures;
      }
      result.unit_cond_loglik(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(n - 1)) =
          lambda;
      result.cond_loglik[n - 1] += lambda;
      result.loglik += lambda;

      if (n == N) {
        // Filter particles for unit u at the final time, drawn by w^{LF}.
        Eigen::MatrixXd& fp = result.filter_particles;
        if (fp.size() == 0) fp.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(J));
        std::vector<std::size_t> anc(J);
        if (std::isfinite(log_sum_exp(numer))) {
          RngStream rng = key.stream(u, N + 1, Channel::Select);
          for (std::size_t j = 0; j < J; ++j) anc[j] = sample_one_log(numer, rng);
        } else {
          for (std::size_t j = 0; j < J; ++j) anc[j] = j;
        }
        for (std::size_t j = 0; j < J; ++j) {
          const double* src = final_proposals.data() + anc[j] * dim + u * K;
          for (std::size_t i = 0; i < K; ++i) {
            fp(static_cast<Eigen::Index>(u * K + i), static_cast<Eigen::Index>(j)) = src[i];
          }
        }
      }
    }
  }
  return result;
}

}  // namespace spatpomp
