#include <cmath>

#include "est_scale.hpp"
#include "spatpomp/errors.hpp"
#include "spatpomp/inference.hpp"
#include "spatpomp/parallel.hpp"

namespace spatpomp {

SearchResult ienkf(const SpatPompModel& model, const ParameterVector& theta0, std::size_t Nenkf,
                   std::size_t Np, const PerturbationSpec& rw, const CoolingSchedule& cooling,
                   const RngKey& key, int threads) {
  using C = SpatPompModel::Component;
  model.require(C::Rinit, "ienkf");
  model.require(C::Rprocess, "ienkf");
  model.require(C::EunitMeasure, "ienkf");
  model.require(C::VunitMeasure, "ienkf");
  if (Nenkf < 1) throw ValidationError("ienkf: Nenkf must be at least 1");
  if (Np < 2) throw ValidationError("ienkf: Np must be at least 2");
  cooling.validate();
  const auto spec = rw.resolve(model);
  const detail::EstScale es(model);
  const std::size_t D = es.size();
  const std::size_t N = model.num_times();
  const std::size_t U = model.units();
  const std::size_t dim = model.state_dim();
  const auto J = static_cast<Eigen::Index>(Np);
  const auto& comp = model.components();

  // Augmented ensemble: rows [0, dim) hold the state, the rest the
  // parameters on the estimation scale.
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(dim + D), J);
  const auto th0 = model.theta_vector(theta0);
  for (Eigen::Index j = 0; j < J; ++j) {
    for (std::size_t d = 0; d < D; ++d) Z(static_cast<Eigen::Index>(dim + d), j) = es.to(d, th0[d]);
  }

  Eigen::MatrixXd forecast(static_cast<Eigen::Index>(U), J);
  Eigen::MatrixXd vars(static_cast<Eigen::Index>(U), J);
  std::vector<double> natural(Np * D);
  Eigen::VectorXd y(static_cast<Eigen::Index>(U));

  SearchResult result;
  for (std::size_t m = 1; m <= Nenkf; ++m) {
    const RngKey keym = key.child(m);
    const double sdm = cooling.sd_multiplier(m);

    auto jitter_and_decode = [&](std::size_t j, std::uint64_t time, bool ivp_pass) {
      const auto col = static_cast<Eigen::Index>(j);
      RngStream rng = keym.stream(j, time, Channel::Perturb);
      for (std::size_t d = 0; d < D; ++d) {
        const auto row = static_cast<Eigen::Index>(dim + d);
        if (spec.ivp[d] == ivp_pass && spec.sd[d] > 0.0) Z(row, col) += sdm * spec.sd[d] * rng.normal();
        natural[j * D + d] = es.from(d, Z(row, col));
      }
    };

    parallel_for(Np, threads, [&](std::size_t j) {
      jitter_and_decode(j, 0, true);
      RngStream rng = keym.stream(j, 0, Channel::Init);
      model.rinit(ThetaView(natural.data() + j * D, D), rng,
                  MutableState(Z.col(static_cast<Eigen::Index>(j)).data(), dim));
    });

    double loglik = 0.0;
    for (std::size_t n = 1; n <= N; ++n) {
      const double from = model.grid().at(n - 1);
      const double to = model.grid().at(n);
      parallel_for(Np, threads, [&](std::size_t j) {
        jitter_and_decode(j, n, false);
        const auto col = static_cast<Eigen::Index>(j);
        const ThetaView th(natural.data() + j * D, D);
        MutableState x(Z.col(col).data(), dim);
        RngStream rng = keym.stream(j, n, Channel::Process);
        model.advance(x, from, to, true, th, rng);
        for (std::size_t u = 0; u < U; ++u) {
          const auto xu = model.unit_state(x, u);
          forecast(static_cast<Eigen::Index>(u), col) = comp.eunit_measure(xu, u, to, th);
          vars(static_cast<Eigen::Index>(u), col) = comp.vunit_measure(xu, u, to, th);
        }
      });
      const Eigen::VectorXd meas_var = vars.rowwise().mean();
      for (std::size_t u = 0; u < U; ++u) y[static_cast<Eigen::Index>(u)] = model.observation(u, n);
      loglik += detail::enkf_analysis(Z, forecast, meas_var, y, keym, n);
    }

    std::vector<double> mean(D);
    for (std::size_t d = 0; d < D; ++d) {
      mean[d] = es.from(d, Z.row(static_cast<Eigen::Index>(dim + d)).mean());
    }
    result.trace.push_back({m, model.to_parameter_vector(mean), loglik});
  }
  result.estimate = result.trace.back().theta;
  result.swarm.resize(static_cast<Eigen::Index>(D), J);
  for (std::size_t d = 0; d < D; ++d) {
    for (Eigen::Index j = 0; j < J; ++j) {
      result.swarm(static_cast<Eigen::Index>(d), j) = es.from(d, Z(static_cast<Eigen::Index>(dim + d), j));
    }
  }
  return result;
}

}  // namespace spatpomp
