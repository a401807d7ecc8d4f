#pragma once

#include <vector>

#include <Eigen/Dense>

namespace spatpomp {

/// X_n = F X_{n-1} + w, w ~ N(0, Q);  Y_n = H X_n + v, v ~ N(0, R);
/// X_0 ~ N(m0, P0). P0 may be zero for a point-mass start.
struct LinearGaussianSpec {
  Eigen::MatrixXd F;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd H;
  Eigen::MatrixXd R;
  Eigen::VectorXd m0;
  Eigen::MatrixXd P0;

  void validate() const;
};

struct KalmanResult {
  double loglik = 0.0;
  std::vector<double> cond_loglik;
  std::vector<Eigen::VectorXd> filter_means;
  std::vector<Eigen::MatrixXd> filter_covariances;
};

/// Exact filter and log likelihood. Observations are columns of a
/// (obs dim) x N matrix and must not contain missing values. The covariance
/// update uses the Joseph form and is symmetrized at every step.
KalmanResult kf_loglik(const LinearGaussianSpec& spec, const Eigen::MatrixXd& observations);

}  // namespace spatpomp
