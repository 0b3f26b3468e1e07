#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "peakforge/unimodal_regression.hpp"

namespace peakforge {

struct AdditiveConfig {
  int q = 20;
  int k = 3;
  PenaltyKind penalty = PenaltyKind::second_order_difference;
  double sigma2 = 1.0;
  LambdaPolicy lambda = reml_default();
  int max_cycles = 100;
};

/// alpha + sum of L centred unimodal components, all on one basis over the
/// range of x.
struct AdditiveFit {
  double alpha = 0.0;
  std::vector<SplineFunction> components;
  std::vector<int> modes;
  std::vector<double> lambdas;
  std::vector<double> edfs;     // unconstrained penalized hat trace per component
  std::vector<bool> frozen;     // collapsed to zero and no longer refitted
  int L = 0;
  Eigen::VectorXd fitted;
  double rss = 0.0;
  double edf = 0.0;             // 1 + sum of component edfs
  double aic = 0.0;             // n log(rss / n) + 2 edf
  std::vector<double> rss_history;  // before the first cycle, then after each cycle
  int cycles = 0;
  bool converged = false;

  /// alpha + sum of the components at x.
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;
};

/// Backfitting from alpha = mean(y) and zero components. Components are
/// refitted in ascending order on partial residuals; a refit that would
/// raise the total RSS is rejected. Each component is centred over the
/// observed x with the offset moved into alpha. A component whose fitted
/// range falls below 1e-6 of the response range is frozen at zero. Stops when
/// the relative RSS change of a cycle is below 1e-6 or after max_cycles.
AdditiveFit backfit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int L,
                    const AdditiveConfig& config);

/// Backfitting warm-started from an earlier fit with the same configuration.
AdditiveFit backfit(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const AdditiveFit& start,
                    const AdditiveConfig& config);

struct AicSelection {
  AdditiveFit best;
  std::vector<double> aic;          // index L - 1; NaN where the fit failed
  std::vector<std::string> errors;  // index L - 1; empty on success
};

/// Fits L = 1..L_max and keeps the smallest AIC, ties to the smaller L.
/// Throws NumericalError when no L could be fitted.
AicSelection select_L_by_aic(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int L_max,
                             const AdditiveConfig& config, int threads = 1);

}  // namespace peakforge
