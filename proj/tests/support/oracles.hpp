#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "spatpomp/model.hpp"
#include "spatpomp/models/bm.hpp"

namespace oracle {

// Log likelihood of bm data from the joint Gaussian law of all
// observations, with no recursion. Cov(X_m, X_n) = min(m, n) dt sigma^2 R R'.
inline double bm_dense_loglik(const spatpomp::SpatPompModel& model,
                              const spatpomp::ParameterVector& theta) {
  const auto U = static_cast<Eigen::Index>(model.units());
  const auto N = static_cast<Eigen::Index>(model.num_times());
  const double dt = model.grid().at(1) - model.grid().at(0);
  const Eigen::MatrixXd R = spatpomp::bm::mixing_matrix(theta["rho"], model.units());
  const Eigen::MatrixXd Q = theta["sigma"] * theta["sigma"] * dt * R * R.transpose();
  const double tau = theta["tau"];
  Eigen::MatrixXd cov(U * N, U * N);
  Eigen::VectorXd y(U * N), mean(U * N);
  for (Eigen::Index m = 0; m < N; ++m) {
    for (Eigen::Index n = 0; n < N; ++n) {
      cov.block(m * U, n * U, U, U) = static_cast<double>(std::min(m, n) + 1) * Q;
    }
    for (Eigen::Index u = 0; u < U; ++u) {
      y[m * U + u] = model.obs().values(u, m);
      mean[m * U + u] = theta["X" + std::to_string(u + 1) + "_0"];
    }
  }
  cov.diagonal().array() += tau * tau;
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(y - mean);
  return -0.5 * (static_cast<double>(U * N) * std::log(2.0 * std::numbers::pi) +
                 2.0 * L.diagonal().array().log().sum() + z.squaredNorm());
}

struct Minimum {
  std::vector<double> x;
  double value;
};

// Nelder-Mead simplex minimiser with standard coefficients.
inline Minimum nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                           std::vector<double> x0, double step = 0.5, double tol = 1e-10,
                           int max_iter = 5000) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> pts(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(pts[i]);
  std::vector<std::size_t> idx(n + 1);
  for (int it = 0; it < max_iter; ++it) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const auto best = idx.front(), worst = idx.back(), second = idx[n - 1];
    if (std::abs(fv[worst] - fv[best]) < tol) break;
    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k <= n; ++k) {
        if (k != worst) centroid[i] += pts[k][i] / static_cast<double>(n);
      }
    }
    auto along = [&](double t) {
      std::vector<double> p(n);
      for (std::size_t i = 0; i < n; ++i) p[i] = centroid[i] + t * (pts[worst][i] - centroid[i]);
      return p;
    };
    auto xr = along(-1.0);
    const double fr = f(xr);
    if (fr < fv[best]) {
      auto xe = along(-2.0);
      const double fe = f(xe);
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      pts[worst] = xr;
      fv[worst] = fr;
    } else {
      auto xc = along(fr < fv[worst] ? -0.5 : 0.5);
      const double fc = f(xc);
      if (fc < std::min(fr, fv[worst])) {
        pts[worst] = xc;
        fv[worst] = fc;
      } else {
        for (std::size_t k = 0; k <= n; ++k) {
          if (k == best) continue;
          for (std::size_t i = 0; i < n; ++i) pts[k][i] = pts[best][i] + 0.5 * (pts[k][i] - pts[best][i]);
          fv[k] = f(pts[k]);
        }
      }
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return {pts[best], fv[best]};
}

struct BmMle {
  spatpomp::ParameterVector theta;
  double loglik;
};

// Maximises the exact bm likelihood over (rho, sigma, tau) on the
// logit/log scale with IVPs held at their values in `start`.
inline BmMle bm_mle(const spatpomp::SpatPompModel& model, spatpomp::ParameterVector start) {
  auto unpack = [&](const std::vector<double>& z) {
    auto th = start;
    th.set("rho", 1.0 / (1.0 + std::exp(-z[0])));
    th.set("sigma", std::exp(z[1]));
    th.set("tau", std::exp(z[2]));
    return th;
  };
  auto f = [&](const std::vector<double>& z) {
    return -spatpomp::bm::exact_loglik(model, unpack(z));
  };
  const std::vector<double> z0 = {std::log(start["rho"] / (1.0 - start["rho"])),
                                  std::log(start["sigma"]), std::log(start["tau"])};
  auto m = nelder_mead(f, z0);
  m = nelder_mead(f, m.x, 0.1);
  return {unpack(m.x), -m.value};
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sd(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace oracle
