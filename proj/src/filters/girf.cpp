#include <algorithm>
#include <cmath>
#include <limits>

#include "spatpomp/errors.hpp"
#include "spatpomp/filters.hpp"
#include "spatpomp/parallel.hpp"
#include "spatpomp/stochastics.hpp"

namespace spatpomp {

namespace detail {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double finite_or_neg_inf(double v) { return std::isnan(v) ? kNegInf : v; }

}  // namespace

FilterResult girf_engine(const SpatPompModel& model, std::vector<double>& theta,
                         const GirfOptions& options, const RngKey& key, int threads,
                         const GirfPerturb& perturb) {
  using C = SpatPompModel::Component;
  model.require(C::Rinit, "girf");
  model.require(C::Rprocess, "girf");
  model.require(C::DunitMeasure, "girf");
  model.require(C::Skeleton, "girf");
  const std::size_t N = model.num_times();
  options.validate(N);

  const std::size_t J = options.Np;
  const std::size_t S = options.Ninter;
  const std::size_t G = options.Nguide;
  const std::size_t L = options.Lookahead;
  const std::size_t U = model.units();
  const std::size_t dim = model.state_dim();
  const std::size_t K = model.unit_dim();
  const std::size_t D = model.params().size();
  if (theta.size() != J * D) throw ValidationError("girf: parameter block has the wrong size");
  const auto& grid = model.grid();

  auto theta_of = [&](const std::vector<double>& block, std::size_t j) {
    return ThetaView(block.data() + j * D, D);
  };

  std::vector<double> X(J * dim);
  std::vector<double> X_next(J * dim);
  std::vector<double> log_gf(J, 0.0);
  std::vector<double> log_gp(J, 0.0);
  std::vector<double> logw(J, 0.0);
  std::vector<double> meas(J, 0.0);
  std::vector<double> theta_next(theta.size());
  // Residuals indexed [j][k][l][i] with l relative to n + 1.
  std::vector<double> eps;
  std::vector<double> eps_next;

  parallel_for(J, threads, [&](std::size_t j) {
    RngStream rng = key.stream(j, 0, Channel::Init);
    model.rinit(theta_of(theta, j), rng, MutableState(X.data() + j * dim, dim));
  });

  FilterResult result;
  for (std::size_t n = 0; n < N; ++n) {
    const std::size_t lend = std::min(n + L, N);
    const std::size_t lc = lend - n;
    const std::size_t stride_k = lc * dim;
    const std::size_t stride_j = G * stride_k;
    eps.assign(J * stride_j, 0.0);
    eps_next.resize(eps.size());

    // Guide simulations and residuals around the deterministic trajectory.
    parallel_for(J, threads, [&](std::size_t j) {
      const ThetaView th = theta_of(theta, j);
      const double* xj = X.data() + j * dim;
      std::vector<double> mu(lc * dim);
      std::vector<double> cur(xj, xj + dim);
      for (std::size_t l = 0; l < lc; ++l) {
        model.reset_accumulators(cur);
        skeleton_integrate(model, cur, grid.at(n + l), grid.at(n + l + 1), th);
        std::copy(cur.begin(), cur.end(), mu.begin() + static_cast<long>(l * dim));
      }
      std::vector<double> sim(dim);
      for (std::size_t k = 0; k < G; ++k) {
        std::copy(xj, xj + dim, sim.begin());
        RngStream rng = key.stream(j * G + k, n, Channel::Guide);
        for (std::size_t l = 0; l < lc; ++l) {
          model.advance(sim, grid.at(n + l), grid.at(n + l + 1), true, th, rng);
          double* e = eps.data() + j * stride_j + k * stride_k + l * dim;
          for (std::size_t i = 0; i < dim; ++i) e[i] = sim[i] - mu[l * dim + i];
        }
      }
    });

    const double tn = grid.at(n);
    const double tn1 = grid.at(n + 1);
    for (std::size_t s = 1; s <= S; ++s) {
      const double t_prev = tn + (tn1 - tn) * static_cast<double>(s - 1) / static_cast<double>(S);
      const double t_cur =
          s == S ? tn1 : tn + (tn1 - tn) * static_cast<double>(s) / static_cast<double>(S);
      const bool with_meas = s == 1 && n >= 1;
      if (with_meas) {
        parallel_for(J, threads, [&](std::size_t j) {
          meas[j] = finite_or_neg_inf(
              model.log_measure_density(n, StateView(X.data() + j * dim, dim), theta_of(theta, j)));
        });
      }
      if (perturb) perturb(n, s, theta);

      const double shrink = std::sqrt((tn1 - t_cur) / (tn1 - tn));
      std::vector<double> eta(lc);
      for (std::size_t l = 0; l < lc; ++l) {
        const std::size_t m = n + l + 1;
        const std::size_t back = m > L ? m - L : 0;
        const double scale = (grid.at(m) - grid.at(back)) * (L == 1 ? 2.0 : 1.0);
        eta[l] = 1.0 - (grid.at(m) - t_cur) / scale;
      }

      parallel_for(J, threads, [&](std::size_t j) {
        const ThetaView th = theta_of(theta, j);
        MutableState x(X.data() + j * dim, dim);
        RngStream rng = key.stream(j, n * S + s, Channel::Process);
        model.advance(x, t_prev, t_cur, s == 1, th, rng);

        std::vector<double> mu(lc * dim);
        std::vector<double> cur(x.begin(), x.end());
        for (std::size_t l = 0; l < lc; ++l) {
          const double from = l == 0 ? t_cur : grid.at(n + l);
          if (l > 0) model.reset_accumulators(cur);
          skeleton_integrate(model, cur, from, grid.at(n + l + 1), th);
          std::copy(cur.begin(), cur.end(), mu.begin() + static_cast<long>(l * dim));
        }

        std::vector<double> xu(K);
        std::vector<double> vals(G);
        const double* e_base = eps.data() + j * stride_j;
        double log_guide = 0.0;
        for (std::size_t l = 0; l < lc && log_guide > kNegInf; ++l) {
          const std::size_t m = n + l + 1;
          for (std::size_t u = 0; u < U; ++u) {
            const double y = model.observation(u, m);
            if (is_missing(y) && !model.components().handles_missing) continue;
            for (std::size_t k = 0; k < G; ++k) {
              const double* e_l = e_base + k * stride_k + l * dim + u * K;
              const double* e_1 = e_base + k * stride_k + u * K;
              for (std::size_t i = 0; i < K; ++i) {
                xu[i] = mu[l * dim + u * K + i] + (e_l[i] - e_1[i]) + shrink * e_1[i];
              }
              vals[k] = finite_or_neg_inf(
                  model.components().dunit_measure(y, xu, u, grid.at(m), th, true));
            }
            const double term = log_mean_exp(vals);
            if (term == kNegInf) {
              log_guide = kNegInf;
              break;
            }
            log_guide += eta[l] * term;
          }
        }
        log_gp[j] = finite_or_neg_inf(log_guide);
        double w = log_gp[j] - log_gf[j];
        if (with_meas) w += meas[j];
        logw[j] = finite_or_neg_inf(w);
      });

      double cond = 0.0;
      if (weight_step(logw, cond)) {
        ++result.n_failures;
        log_gf = log_gp;
      } else {
        RngStream rng = key.stream(0, n * S + s, Channel::Resample);
        const auto anc = systematic_resample_log(logw, rng);
        for (std::size_t j = 0; j < J; ++j) {
          const std::size_t a = anc[j];
          std::copy_n(X.data() + a * dim, dim, X_next.data() + j * dim);
          std::copy_n(eps.data() + a * stride_j, stride_j, eps_next.data() + j * stride_j);
          std::copy_n(theta.data() + a * D, D, theta_next.data() + j * D);
          log_gf[j] = log_gp[a];
        }
        X.swap(X_next);
        eps.swap(eps_next);
        theta.swap(theta_next);
      }
      result.cond_loglik.push_back(cond);
      result.loglik += cond;
    }
  }

  result.filter_particles = Eigen::Map<Eigen::MatrixXd>(X.data(), static_cast<Eigen::Index>(dim),
                                                        static_cast<Eigen::Index>(J));
  return result;
}

}  // namespace detail

FilterResult girf(const SpatPompModel& model, const ParameterVector& theta,
                  const GirfOptions& options, const RngKey& key, int threads) {
  const auto th = model.theta_vector(theta);
  std::vector<double> block;
  block.reserve(options.Np * th.size());
  for (std::size_t j = 0; j < options.Np; ++j) block.insert(block.end(), th.begin(), th.end());
  return detail::girf_engine(model, block, options, key, threads, {});
}

}  // namespace spatpomp
