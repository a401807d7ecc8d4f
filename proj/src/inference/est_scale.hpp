#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "spatpomp/inference.hpp"
#include "spatpomp/model.hpp"

namespace spatpomp::detail {

// Per-index transform for the hot loops. Values are clamped into the open
// domain first so that a back-transformed value that rounded onto a
// boundary still maps to a finite estimation-scale number.
class EstScale {
 public:
  explicit EstScale(const SpatPompModel& model) {
    for (const auto& name : model.params().names()) scales_.push_back(model.transform().scale(name));
  }

  std::size_t size() const { return scales_.size(); }

  double to(std::size_t d, double v) const {
    constexpr double tiny = std::numeric_limits<double>::denorm_min();
    switch (scales_[d]) {
      case Scale::Identity:
        return v;
      case Scale::Log:
        return std::log(std::max(v, tiny));
      case Scale::Logit: {
        const double c = std::clamp(v, tiny, std::nextafter(1.0, 0.0));
        return std::log(c) - std::log1p(-c);
      }
    }
    return v;
  }

  double from(std::size_t d, double v) const {
    switch (scales_[d]) {
      case Scale::Identity:
        return v;
      case Scale::Log:
        return std::exp(v);
      case Scale::Logit:
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    return v;
  }

 private:
  std::vector<Scale> scales_;
};

// Mean of a J x D block on the estimation scale, returned on the natural scale.
inline std::vector<double> est_mean(const EstScale& es, const std::vector<double>& natural,
                                    std::size_t J) {
  const std::size_t D = es.size();
  std::vector<double> mean(D, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t d = 0; d < D; ++d) mean[d] += es.to(d, natural[j * D + d]);
  }
  for (std::size_t d = 0; d < D; ++d) mean[d] = es.from(d, mean[d] / static_cast<double>(J));
  return mean;
}

inline Eigen::MatrixXd swarm_matrix(const std::vector<double>& natural, std::size_t D,
                                    std::size_t J) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(J));
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t d = 0; d < D; ++d) {
      out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(j)) = natural[j * D + d];
    }
  }
  return out;
}

}  // namespace spatpomp::detail
