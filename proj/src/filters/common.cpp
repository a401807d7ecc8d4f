#include <algorithm>
#include <cmath>

#include "spatpomp/errors.hpp"
#include "spatpomp/filters.hpp"
#include "spatpomp/stochastics.hpp"

namespace spatpomp {

NeighborhoodSpec NeighborhoodSpec::adjacent() {
  return {[](std::size_t u, std::size_t n) {
    std::vector<SpaceTimePoint> pts;
    if (n > 1) pts.emplace_back(u, n - 1);
    if (u > 0) pts.emplace_back(u - 1, n);
    return pts;
  }};
}

NeighborhoodSpec NeighborhoodSpec::full(std::size_t U) {
  return {[U](std::size_t u, std::size_t n) {
    std::vector<SpaceTimePoint> pts;
    for (std::size_t m = 1; m < n; ++m) {
      for (std::size_t v = 0; v < U; ++v) pts.emplace_back(v, m);
    }
    for (std::size_t v = 0; v < u; ++v) pts.emplace_back(v, n);
    return pts;
  }};
}

NeighborhoodSpec NeighborhoodSpec::preset(const std::string& name, std::size_t U) {
  if (name == "adjacent") return adjacent();
  if (name == "full") return full(U);
  throw ValidationError("unknown neighborhood preset '" + name + "' (expected adjacent or full)");
}

void NeighborhoodSpec::validate(std::size_t U, std::size_t N) const {
  if (!points) throw ValidationError("neighborhood function is empty");
  for (std::size_t n = 1; n <= N; ++n) {
    for (std::size_t u = 0; u < U; ++u) {
      for (const auto& [v, m] : points(u, n)) {
        const bool ok = v < U && m >= 1 && (m < n || (m == n && v < u));
        if (!ok) {
          throw ValidationError("neighborhood of (" + std::to_string(u + 1) + "," +
                                std::to_string(n) + ") contains (" + std::to_string(v + 1) + "," +
                                std::to_string(m) + "), which is not strictly before it");
        }
      }
    }
  }
}

BlockPartition BlockPartition::by_size(std::size_t U, std::size_t size) {
  if (size < 1) throw ValidationError("block size must be at least 1");
  BlockPartition p;
  for (std::size_t start = 0; start < U; start += size) {
    std::vector<std::size_t> block;
    for (std::size_t u = start; u < std::min(U, start + size); ++u) block.push_back(u);
    p.blocks.push_back(std::move(block));
  }
  return p;
}

void BlockPartition::validate(std::size_t U) const {
  std::vector<int> seen(U, 0);
  for (const auto& b : blocks) {
    if (b.empty()) throw ValidationError("block partition contains an empty block");
    for (std::size_t u : b) {
      if (u >= U) throw ValidationError("block partition refers to unit " + std::to_string(u + 1));
      if (seen[u]++) {
        throw ValidationError("unit " + std::to_string(u + 1) + " appears in two blocks");
      }
    }
  }
  for (std::size_t u = 0; u < U; ++u) {
    if (!seen[u]) throw ValidationError("unit " + std::to_string(u + 1) + " is in no block");
  }
}

void GirfOptions::validate(std::size_t N) const {
  if (Np < 1) throw ValidationError("girf: Np must be at least 1");
  if (Ninter < 1) throw ValidationError("girf: Ninter must be at least 1");
  if (Nguide < 1) throw ValidationError("girf: Nguide must be at least 1");
  if (Lookahead < 1) throw ValidationError("girf: Lookahead must be at least 1");
  if (Lookahead > N) throw ValidationError("girf: Lookahead cannot exceed the number of times");
}

namespace detail {

bool weight_step(std::span<const double> log_weights, double& cond_loglik) {
  double top = -std::numeric_limits<double>::infinity();
  for (double w : log_weights) {
    if (w > top) top = w;
  }
  const double floor = std::log(kWeightTolerance);
  if (!(top >= floor)) {
    cond_loglik = floor;
    return true;
  }
  cond_loglik = log_mean_exp(log_weights);
  return false;
}

void skeleton_integrate(const SpatPompModel& model, MutableState x, double s, double t,
                        ThetaView theta) {
  if (!(t > s)) return;
  const auto& skel = model.components().skeleton;
  const double delta = model.components().delta;
  std::size_t steps = 1;
  if (std::isfinite(delta)) {
    steps = static_cast<std::size_t>(std::max(1.0, std::ceil((t - s) / delta - 1e-9)));
  }
  const double h = (t - s) / static_cast<double>(steps);
  const std::size_t d = x.size();
  std::vector<double> k1(d), k2(d), k3(d), k4(d), tmp(d);
  CovariateValues covar;
  auto eval = [&](StateView state, double time, std::vector<double>& out) {
    model.covariates().interpolate(time, covar);
    skel(state, time, theta, covar, out);
    for (double v : out) {
      if (!std::isfinite(v)) throw IntegrationError("skeleton returned a non-finite derivative");
    }
  };
  for (std::size_t step = 0; step < steps; ++step) {
    const double t0 = s + h * static_cast<double>(step);
    eval(x, t0, k1);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    eval(tmp, t0 + 0.5 * h, k2);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    eval(tmp, t0 + 0.5 * h, k3);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + h * k3[i];
    eval(tmp, t0 + h, k4);
    for (std::size_t i = 0; i < d; ++i) {
      x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
  }
}

}  // namespace detail

std::vector<double> skeleton_trajectory(const SpatPompModel& model, std::span<const double> x,
                                        double s, double t, const ParameterVector& theta) {
  model.require(SpatPompModel::Component::Skeleton, "skeleton_trajectory");
  if (t < s) throw ValidationError("skeleton_trajectory requires s <= t");
  if (x.size() != model.state_dim()) throw ValidationError("state has the wrong dimension");
  std::vector<double> out(x.begin(), x.end());
  const auto th = model.theta_vector(theta);
  detail::skeleton_integrate(model, out, s, t, th);
  return out;
}

}  // namespace spatpomp
