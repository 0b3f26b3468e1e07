#pragma once

// Direct numerical integration of the marginal likelihood of y under
// beta ~ N(beta0, (lambda Omega)^-1) for three coefficients, by tensor
// trapezoid rule on a box around the posterior mode.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace oracle {

inline double integrated_log_likelihood_3d(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                           const Eigen::Matrix3d& omega, const Eigen::Vector3d& beta0,
                                           double lambda, double sigma2, int points = 161,
                                           double half_width_sd = 9.0) {
  const double n = static_cast<double>(y.size());
  const Eigen::Matrix3d precision = design.transpose() * design / sigma2 + lambda * omega;
  const Eigen::Vector3d center = precision.colPivHouseholderQr().solve(
      design.transpose() * y / sigma2 + lambda * omega * beta0);
  const Eigen::Matrix3d covariance = precision.inverse();

  Eigen::Vector3d h;
  Eigen::Vector3d lo;
  for (int i = 0; i < 3; ++i) {
    const double sd = std::sqrt(covariance(i, i));
    lo[i] = center[i] - half_width_sd * sd;
    h[i] = 2.0 * half_width_sd * sd / (points - 1);
  }

  const double log_prior_norm = 0.5 * std::log((lambda * omega).determinant()) -
                                1.5 * std::log(2.0 * std::numbers::pi);
  const double log_lik_norm = -0.5 * n * std::log(2.0 * std::numbers::pi * sigma2);

  auto log_integrand = [&](const Eigen::Vector3d& beta) {
    const Eigen::Vector3d delta = beta - beta0;
    return log_lik_norm - 0.5 * (y - design * beta).squaredNorm() / sigma2 + log_prior_norm -
           0.5 * lambda * delta.dot(omega * delta);
  };

  const double anchor = log_integrand(center);
  double sum = 0.0;
  for (int i = 0; i < points; ++i) {
    const double wi = (i == 0 || i == points - 1) ? 0.5 : 1.0;
    for (int j = 0; j < points; ++j) {
      const double wj = (j == 0 || j == points - 1) ? 0.5 : 1.0;
      for (int l = 0; l < points; ++l) {
        const double wl = (l == 0 || l == points - 1) ? 0.5 : 1.0;
        const Eigen::Vector3d beta(lo[0] + i * h[0], lo[1] + j * h[1], lo[2] + l * h[2]);
        sum += wi * wj * wl * std::exp(log_integrand(beta) - anchor);
      }
    }
  }
  return anchor + std::log(sum * h[0] * h[1] * h[2]);
}

}  // namespace oracle
