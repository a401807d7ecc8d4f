#include <cmath>
#include <numbers>

#include "spatpomp/errors.hpp"
#include "spatpomp/filters.hpp"
#include "spatpomp/parallel.hpp"
#include "spatpomp/stochastics.hpp"

namespace spatpomp {

namespace detail {

double enkf_analysis(Eigen::MatrixXd& Z, const Eigen::MatrixXd& forecast,
                     const Eigen::VectorXd& meas_var, const Eigen::VectorXd& y,
                     const RngKey& key, std::size_t n) {
  const Eigen::Index J = Z.cols();
  std::vector<Eigen::Index> observed;
  for (Eigen::Index u = 0; u < y.size(); ++u) {
    if (!is_missing(y[u])) observed.push_back(u);
  }
  const auto m = static_cast<Eigen::Index>(observed.size());
  if (m == 0) return 0.0;

  Eigen::MatrixXd Yhat(m, J);
  Eigen::VectorXd yobs(m);
  Eigen::VectorXd R(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Yhat.row(i) = forecast.row(observed[static_cast<std::size_t>(i)]);
    yobs[i] = y[observed[static_cast<std::size_t>(i)]];
    R[i] = meas_var[observed[static_cast<std::size_t>(i)]];
  }
  const Eigen::VectorXd ybar = Yhat.rowwise().mean();
  const Eigen::MatrixXd Ytil = Yhat.colwise() - ybar;
  const Eigen::MatrixXd Ztil = Z.colwise() - Z.rowwise().mean();
  const double denom = static_cast<double>(J - 1);

  Eigen::MatrixXd SigmaY = Ytil * Ytil.transpose() / denom;
  SigmaY.diagonal() += R;
  SigmaY = 0.5 * (SigmaY + SigmaY.transpose());
  const Eigen::MatrixXd SigmaZY = Ztil * Ytil.transpose() / denom;

  const Eigen::MatrixXd L = cholesky_with_jitter(SigmaY);
  if (!(L.diagonal().array() > 0.0).all()) {
    throw LinearAlgebraError("enkf: forecast covariance is singular");
  }
  const auto tri = L.triangularView<Eigen::Lower>();

  // K = SigmaZY SigmaY^{-1}
  const Eigen::MatrixXd Kt =
      L.transpose().triangularView<Eigen::Upper>().solve(tri.solve(SigmaZY.transpose()));

  const Eigen::VectorXd z = tri.solve(yobs - ybar);
  const double log_det = 2.0 * L.diagonal().array().log().sum();
  const double ll = -0.5 * (static_cast<double>(m) * std::log(2.0 * std::numbers::pi) + log_det +
                            z.squaredNorm());

  Eigen::MatrixXd innov(m, J);
  const Eigen::VectorXd noise_sd = R.cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index j = 0; j < J; ++j) {
    RngStream rng = key.stream(static_cast<std::uint64_t>(j), n, Channel::Noise);
    for (Eigen::Index i = 0; i < m; ++i) {
      innov(i, j) = yobs[i] - Yhat(i, j) + noise_sd[i] * rng.normal();
    }
  }
  Z.noalias() += Kt.transpose() * innov;
  return ll;
}

}  // namespace detail

FilterResult enkf(const SpatPompModel& model, const ParameterVector& theta, std::size_t Np,
                  const RngKey& key, int threads) {
  using C = SpatPompModel::Component;
  model.require(C::Rinit, "enkf");
  model.require(C::Rprocess, "enkf");
  model.require(C::EunitMeasure, "enkf");
  model.require(C::VunitMeasure, "enkf");
  if (Np < 2) throw ValidationError("enkf: Np must be at least 2");

  const auto th = model.theta_vector(theta);
  const std::size_t N = model.num_times();
  const std::size_t U = model.units();
  const std::size_t dim = model.state_dim();
  const auto J = static_cast<Eigen::Index>(Np);
  const auto& comp = model.components();

  Eigen::MatrixXd X(static_cast<Eigen::Index>(dim), J);
  parallel_for(Np, threads, [&](std::size_t j) {
    RngStream rng = key.stream(j, 0, Channel::Init);
    model.rinit(th, rng, MutableState(X.col(static_cast<Eigen::Index>(j)).data(), dim));
  });

  FilterResult result;
  Eigen::MatrixXd forecast(static_cast<Eigen::Index>(U), J);
  Eigen::MatrixXd vars(static_cast<Eigen::Index>(U), J);
  for (std::size_t n = 1; n <= N; ++n) {
    const double from = model.grid().at(n - 1);
    const double to = model.grid().at(n);
    parallel_for(Np, threads, [&](std::size_t j) {
      const auto col = static_cast<Eigen::Index>(j);
      MutableState x(X.col(col).data(), dim);
      RngStream rng = key.stream(j, n, Channel::Process);
      model.advance(x, from, to, true, th, rng);
      for (std::size_t u = 0; u < U; ++u) {
        const auto xu = model.unit_state(x, u);
        forecast(static_cast<Eigen::Index>(u), col) = comp.eunit_measure(xu, u, to, th);
        vars(static_cast<Eigen::Index>(u), col) = comp.vunit_measure(xu, u, to, th);
      }
    });
    const Eigen::VectorXd meas_var = vars.rowwise().mean();
    Eigen::VectorXd y(static_cast<Eigen::Index>(U));
    for (std::size_t u = 0; u < U; ++u) y[static_cast<Eigen::Index>(u)] = model.observation(u, n);
    const double ll = detail::enkf_analysis(X, forecast, meas_var, y, key, n);
    result.cond_loglik.push_back(ll);
    result.loglik += ll;
  }
  result.filter_particles = X;
  return result;
}

}  // namespace spatpomp
