#pragma once

#include <Eigen/Dense>
#include <vector>

#include "peakforge/spline_basis.hpp"

namespace peakforge {

/// (z - min) / (max - min), or z / max when all entries are equal.
/// Throws ValidationError when all entries are zero.
Eigen::VectorXd unit_scale(const Eigen::VectorXd& z);

struct VaryingOptions {
  int q = 200;
  int k = 3;
  double kappa = 0.002;
  /// Noise variance in the units of the raw response; rescaled internally
  /// to the unit-scaled response.
  double sigma2 = 1.0;
  int max_outer = 200;
  int threads = 1;
};

struct VaryingPeak {
  int column = 0;
  double location = 0.0;  // x at the maximum of the column's spline
  double height = 0.0;    // unit scale
  double height_raw = 0.0;  // response units
};

struct VaryingDecoResult {
  Eigen::MatrixXd G;        // n x d, unit-scaled shape columns
  Eigen::VectorXd a;        // unit scale
  Eigen::VectorXd fitted;   // unit scale, equals G a
  Eigen::VectorXd fitted_raw;  // response units
  std::vector<int> active_set;
  std::vector<VaryingPeak> peaks;
  /// Spline coefficients behind each column before unit scaling; column j is
  /// (s_j(x) - column_min[j]) / column_range[j] (or s_j(x) / column_range[j]
  /// for a constant fit).
  Eigen::MatrixXd coefficients;  // d x d, column j holds s_j
  Eigen::VectorXd column_min;
  Eigen::VectorXd column_range;
  double y_min = 0.0;
  double y_range = 1.0;
  int iterations = 0;
  bool converged = false;
};

/// Deconvolution with varying unimodal peak shapes. Column j of G is a spline
/// with its mode fixed at coefficient j, fitted with a ridge penalty whose
/// weight is chosen by approximate REML; pulses are estimated by adaptive
/// ridge iterations. Indices are 0-based.
VaryingDecoResult varying_l0_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                 const VaryingOptions& options);

/// Sample variance (divisor n - 1) of y[first..last], inclusive 0-based
/// indices. Needs at least 30 values; refuses a zero estimate.
double estimate_noise_from_window(const Eigen::VectorXd& y, int first, int last);

}  // namespace peakforge
