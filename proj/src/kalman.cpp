#include "spatpomp/kalman.hpp"

#include <cmath>
#include <numbers>

#include "spatpomp/errors.hpp"

namespace spatpomp {

namespace {

bool is_symmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale;
}

bool is_psd(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return eig.eigenvalues().minCoeff() >= -1e-10 * scale;
}

}  // namespace

void LinearGaussianSpec::validate() const {
  const auto n = F.rows();
  if (F.cols() != n || Q.rows() != n || Q.cols() != n || m0.size() != n || P0.rows() != n ||
      P0.cols() != n || H.cols() != n || R.rows() != H.rows() || R.cols() != H.rows()) {
    throw ValidationError("linear-Gaussian spec has inconsistent dimensions");
  }
  if (!is_symmetric(Q) || !is_psd(Q)) throw ValidationError("Q must be symmetric PSD");
  if (!is_symmetric(R) || !is_psd(R)) throw ValidationError("R must be symmetric PSD");
  if (!is_symmetric(P0) || !is_psd(P0)) throw ValidationError("P0 must be symmetric PSD");
}

KalmanResult kf_loglik(const LinearGaussianSpec& spec, const Eigen::MatrixXd& observations) {
  spec.validate();
  if (observations.rows() != spec.H.rows()) {
    throw ValidationError("observation dimension does not match H");
  }
  if (observations.array().isNaN().any()) {
    throw ValidationError("kf_loglik does not support missing observations");
  }

  const auto dim = spec.F.rows();
  const auto obs_dim = spec.H.rows();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(dim, dim);
  const double log_2pi = std::log(2.0 * std::numbers::pi);

  KalmanResult result;
  Eigen::VectorXd m = spec.m0;
  Eigen::MatrixXd P = spec.P0;
  for (Eigen::Index n = 0; n < observations.cols(); ++n) {
    const Eigen::VectorXd m_pred = spec.F * m;
    Eigen::MatrixXd P_pred = spec.F * P * spec.F.transpose() + spec.Q;
    P_pred = 0.5 * (P_pred + P_pred.transpose());

    Eigen::MatrixXd S = spec.H * P_pred * spec.H.transpose() + spec.R;
    S = 0.5 * (S + S.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) {
      throw LinearAlgebraError("innovation covariance is singular");
    }
    const Eigen::VectorXd innovation = observations.col(n) - spec.H * m_pred;
    const Eigen::MatrixXd L = llt.matrixL();
    const double log_det = 2.0 * L.diagonal().array().log().sum();
    if (!std::isfinite(log_det)) throw LinearAlgebraError("innovation covariance is singular");
    const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(innovation);
    const double ll = -0.5 * (static_cast<double>(obs_dim) * log_2pi + log_det + z.squaredNorm());
    result.cond_loglik.push_back(ll);
    result.loglik += ll;

    // K = P_pred H' S^{-1}
    const Eigen::MatrixXd K = llt.solve(spec.H * P_pred).transpose();
    m = m_pred + K * innovation;
    const Eigen::MatrixXd A = identity - K * spec.H;
    P = A * P_pred * A.transpose() + K * spec.R * K.transpose();
    P = 0.5 * (P + P.transpose());
    result.filter_means.push_back(m);
    result.filter_covariances.push_back(P);
  }
  return result;
}

}  // namespace spatpomp
