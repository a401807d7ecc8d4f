#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "spatpomp/errors.hpp"
#include "spatpomp/inference.hpp"

namespace spatpomp {

ProfileDesign profile_design(const std::string& name, const std::vector<double>& grid,
                             const ParameterVector& base, const ParameterVector& lower,
                             const ParameterVector& upper, const ParamTransform& transform,
                             std::size_t nprof, const RngKey& key) {
  if (grid.empty()) throw ValidationError("profile grid is empty");
  if (nprof < 1) throw ValidationError("nprof must be at least 1");
  if (!base.contains(name)) throw ValidationError("profiled parameter '" + name + "' is unknown");
  if (lower.contains(name) || upper.contains(name)) {
    throw ValidationError("profiled parameter '" + name + "' must not appear in the box bounds");
  }
  if (lower.names() != upper.names()) {
    throw ValidationError("lower and upper box bounds must name the same parameters");
  }
  std::vector<double> lo, hi;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    const auto& p = lower.names()[i];
    if (!base.contains(p)) throw ValidationError("box bound for unknown parameter '" + p + "'");
    if (!(lower.at(i) <= upper.at(i))) {
      throw ValidationError("box bound for '" + p + "' has lower > upper");
    }
    lo.push_back(transform.to_est(p, lower.at(i)));
    hi.push_back(transform.to_est(p, upper.at(i)));
  }

  ProfileDesign design{name, grid, {}};
  std::size_t row = 0;
  for (double g : grid) {
    for (std::size_t i = 0; i < nprof; ++i, ++row) {
      ParameterVector start = base;
      start.set(name, g);
      RngStream rng = key.stream(row, 0, Channel::Design);
      for (std::size_t b = 0; b < lo.size(); ++b) {
        const double est = lo[b] + (hi[b] - lo[b]) * rng.uniform();
        start.set(lower.names()[b], transform.from_est(lower.names()[b], est));
      }
      design.starts.push_back(std::move(start));
    }
  }
  return design;
}

namespace {

// Weighted least squares for y ~ c0 + c1 x + c2 x^2. Returns the
// coefficients and (X'WX)^{-1}.
struct QuadFit {
  Eigen::Vector3d coef;
  Eigen::Matrix3d inv;
  double rss = 0.0;
  std::size_t n_pos = 0;
};

QuadFit weighted_quadratic(const std::vector<double>& x, const std::vector<double>& y,
                           const std::vector<double>& w, double centre) {
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  QuadFit fit;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(w[i] > 0.0)) continue;
    ++fit.n_pos;
    const double d = x[i] - centre;
    const Eigen::Vector3d row(1.0, d, d * d);
    A += w[i] * row * row.transpose();
    rhs += w[i] * y[i] * row;
  }
  const auto cod = A.completeOrthogonalDecomposition();
  fit.coef = cod.solve(rhs);
  fit.inv = cod.pseudoInverse();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(w[i] > 0.0)) continue;
    const double d = x[i] - centre;
    const double r = y[i] - (fit.coef[0] + fit.coef[1] * d + fit.coef[2] * d * d);
    fit.rss += w[i] * r * r;
  }
  return fit;
}

double tricube(double u) {
  if (u >= 1.0) return 0.0;
  const double t = 1.0 - u * u * u;
  return t * t * t;
}

// Local quadratic regression (degree 2, tricube kernel) evaluated at x0.
double loess_at(const std::vector<double>& x, const std::vector<double>& y, double span,
                double x0) {
  const std::size_t n = x.size();
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = std::abs(x[i] - x0);
  std::vector<double> sorted = dist;
  std::sort(sorted.begin(), sorted.end());
  const auto q = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(span * static_cast<double>(n))), 3, n);
  double h = sorted[q - 1];
  if (span > 1.0) h *= std::sqrt(span);
  // Widen slightly so the q-th neighbour keeps a positive weight.
  h = h * (1.0 + 1e-8) + std::numeric_limits<double>::min();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = tricube(dist[i] / h);
  return weighted_quadratic(x, y, w, x0).coef[0];
}

}  // namespace

McapResult mcap(const std::vector<double>& loglik, const std::vector<double>& parameter,
                double level, double span, std::size_t ngrid) {
  if (loglik.size() != parameter.size()) {
    throw ValidationError("mcap: loglik and parameter lengths differ");
  }
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("mcap: level must lie in (0, 1)");
  if (!(span > 0.0)) throw ValidationError("mcap: span must be positive");
  if (ngrid < 2) throw ValidationError("mcap: grid must have at least two points");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < loglik.size(); ++i) {
    if (std::isfinite(loglik[i]) && std::isfinite(parameter[i])) {
      x.push_back(parameter[i]);
      y.push_back(loglik[i]);
    }
  }
  std::vector<double> distinct = x;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 5) throw ValidationError("mcap needs at least 5 distinct parameter values");

  McapResult out;
  const double pmin = distinct.front();
  const double pmax = distinct.back();
  out.grid.resize(ngrid);
  out.smoothed.resize(ngrid);
  std::size_t best = 0;
  for (std::size_t g = 0; g < ngrid; ++g) {
    out.grid[g] = pmin + (pmax - pmin) * static_cast<double>(g) / static_cast<double>(ngrid - 1);
    out.smoothed[g] = loess_at(x, y, span, out.grid[g]);
    if (out.smoothed[g] > out.smoothed[best]) best = g;
  }
  out.maximizer = out.grid[best];

  // Weighted quadratic around the smoothed maximizer, used to split the
  // uncertainty into statistical and Monte Carlo parts.
  const std::size_t n = x.size();
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = std::abs(x[i] - out.maximizer);
  std::vector<double> sorted = dist;
  std::sort(sorted.begin(), sorted.end());
  const auto cut_index = std::max<std::size_t>(1, static_cast<std::size_t>(span * static_cast<double>(n)));
  const double cut = sorted[std::min(cut_index, n) - 1];
  double maxdist = 0.0;
  for (double d : dist) {
    if (d < cut) maxdist = std::max(maxdist, d);
  }
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i] < cut) w[i] = maxdist > 0.0 ? tricube(dist[i] / maxdist) : 1.0;
  }
  // Refit in the form loglik = c - a x^2 + b x (uncentred).
  const QuadFit fit = weighted_quadratic(x, y, w, 0.0);
  const double a = -fit.coef[2];
  const double b = fit.coef[1];
  const double df = static_cast<double>(fit.n_pos) - 3.0;
  const double sigma2 = df > 0.0 ? fit.rss / df : std::numeric_limits<double>::quiet_NaN();
  const Eigen::Matrix3d vc = sigma2 * fit.inv;
  const double var_b = vc(1, 1);
  const double var_a = vc(2, 2);
  const double cov_ab = -vc(1, 2);
  const double q = boost::math::quantile(boost::math::chi_squared(1.0), level);

  double delta = std::numeric_limits<double>::infinity();
  if (a > 0.0 && std::isfinite(a)) {
    double se_mc2 = (1.0 / (4.0 * a * a)) *
                    (var_b - (2.0 * b / a) * cov_ab + (b * b / (a * a)) * var_a);
    if (!std::isfinite(se_mc2)) se_mc2 = 0.0;
    se_mc2 = std::max(se_mc2, 0.0);
    out.se_mc = std::sqrt(se_mc2);
    out.se_stat = std::sqrt(1.0 / (2.0 * a));
    delta = q * (a * se_mc2 + 0.5);
  } else {
    out.se_mc = std::numeric_limits<double>::quiet_NaN();
    out.se_stat = std::numeric_limits<double>::quiet_NaN();
  }
  out.cutoff = delta;

  const double top = out.smoothed[best];
  std::size_t lo = best, hi = best;
  for (std::size_t g = 0; g < ngrid; ++g) {
    if (top - out.smoothed[g] < delta) {
      lo = std::min(lo, g);
      hi = std::max(hi, g);
    }
  }
  out.lo = out.grid[lo];
  out.hi = out.grid[hi];
  out.one_sided = lo == 0 || hi == ngrid - 1;
  return out;
}

}  // namespace spatpomp
