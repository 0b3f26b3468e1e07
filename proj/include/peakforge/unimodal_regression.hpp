#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "peakforge/spline_basis.hpp"

namespace peakforge {

enum class PenaltyKind { ridge, second_order_difference, against_parametric };

/// Quadratic penalty lambda * (beta - beta0)' Omega (beta - beta0).
class PenaltySpec {
 public:
  /// Omega = I, beta0 = 0.
  static PenaltySpec ridge(int dimension);
  /// Omega = D2'D2 with second-order differences, beta0 = 0. Needs d >= 3.
  static PenaltySpec second_order_difference(int dimension);
  /// User-supplied Omega (symmetric PSD) and beta0.
  static PenaltySpec against_parametric(Eigen::MatrixXd omega, Eigen::VectorXd beta0);

  PenaltyKind kind() const { return kind_; }
  int dimension() const { return static_cast<int>(beta0_.size()); }
  const Eigen::MatrixXd& omega() const { return omega_; }
  const Eigen::VectorXd& beta0() const { return beta0_; }
  int rank() const { return rank_; }
  /// log of the product of the nonzero eigenvalues of Omega.
  double log_pseudo_determinant() const { return log_pdet_; }

  double value(const Eigen::VectorXd& beta) const;

 private:
  PenaltySpec(PenaltyKind kind, Eigen::MatrixXd omega, Eigen::VectorXd beta0);

  PenaltyKind kind_;
  Eigen::MatrixXd omega_;
  Eigen::VectorXd beta0_;
  int rank_ = 0;
  double log_pdet_ = 0.0;
};

struct FixedLambda {
  double value;
};

struct RemlLambda {
  std::vector<double> grid;
};

using LambdaPolicy = std::variant<FixedLambda, RemlLambda>;

/// 50 log-spaced values from 1e-6 to 1e6.
std::vector<double> default_lambda_grid();

inline LambdaPolicy reml_default() { return RemlLambda{default_lambda_grid()}; }

/// One mode-constrained fit on a fixed design.
struct ModeFit {
  Eigen::VectorXd coefficients;
  int mode = 0;
  double lambda = 0.0;
  double rss = 0.0;
  double prss = 0.0;
};

/// True when beta is non-decreasing through `mode` and non-increasing after.
bool in_unimodal_cone(const Eigen::VectorXd& beta, int mode, double tolerance = 1e-9);

/// Penalized unimodal regression on a fixed n x d design B.
///
/// Minimizes (1/sigma2)||y - B beta||^2 + lambda ||Omega^(1/2)(beta - beta0)||^2
/// over the cone of coefficient vectors that rise up to `mode` and fall after
/// it. Modes are 0-based coefficient indices. The solver is immutable after
/// construction and safe to share between threads.
class UnimodalSolver {
 public:
  UnimodalSolver(Eigen::MatrixXd design, PenaltySpec penalty, double sigma2);

  const Eigen::MatrixXd& design() const { return design_; }
  const PenaltySpec& penalty() const { return penalty_; }
  double sigma2() const { return sigma2_; }
  int dimension() const { return static_cast<int>(design_.cols()); }
  int observations() const { return static_cast<int>(design_.rows()); }

  Eigen::VectorXd fit_fixed_mode(const Eigen::VectorXd& y, int mode, double lambda) const;

  /// Fits every mode at one lambda and keeps the smallest RSS; ties go to
  /// the smallest mode. `threads` > 1 spreads the modes over workers with
  /// identical results.
  ModeFit fit_all_modes(const Eigen::VectorXd& y, double lambda, int threads = 1) const;

  /// Resolves the lambda policy, then fit_all_modes.
  ModeFit fit_unimodal(const Eigen::VectorXd& y, const LambdaPolicy& policy, int threads = 1) const;

  /// Approximate-REML log-likelihood: beta | lambda ~ N(beta0, Omega^- / lambda)
  /// without the cone truncation, integrated out; the null space of Omega
  /// carries a flat prior.
  double restricted_log_likelihood(const Eigen::VectorXd& y, double lambda) const;

  /// Grid value with the largest restricted log-likelihood (first on ties).
  double reml_select_lambda(const Eigen::VectorXd& y, const std::vector<double>& grid) const;

  /// trace(B (B'B/sigma2 + lambda Omega)^-1 B' / sigma2).
  double effective_df(double lambda) const;

  double rss(const Eigen::VectorXd& y, const Eigen::VectorXd& beta) const;
  double prss(const Eigen::VectorXd& y, const Eigen::VectorXd& beta, double lambda) const;

 private:
  struct SpectralCache;
  const SpectralCache& spectral() const;

  Eigen::MatrixXd design_;
  PenaltySpec penalty_;
  double sigma2_;
  Eigen::MatrixXd gram_;  // B'B / sigma2
  std::shared_ptr<SpectralCache> cache_;
};

/// Spline-level result of a unimodal fit.
struct UnimodalFit {
  SplineFunction spline;
  int mode = 0;
  double lambda = 0.0;
  double sigma2 = 1.0;
  double rss = 0.0;
  double prss = 0.0;
  double edf = 0.0;
  int sigma_iterations = 0;
  bool converged = true;
};

/// Unimodal fit of (x, y) on `basis` with fixed sigma2.
UnimodalFit fit_unimodal(const BSplineBasis& basis, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y, const PenaltySpec& penalty, double sigma2,
                         const LambdaPolicy& policy = reml_default(), int threads = 1);

/// Alternates fit_unimodal and sigma2 <- RSS / (n - edf) until successive
/// sigma2 values differ by less than abstol (at most 100 alternations).
UnimodalFit fit_with_sigma_iteration(const BSplineBasis& basis, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& y, const PenaltySpec& penalty,
                                     double sigma2_init = 2.0, double abstol = 0.01,
                                     const LambdaPolicy& policy = reml_default(),
                                     int threads = 1);

struct FixedSigma2 {
  double value = 1.0;
};

struct IteratedSigma2 {
  double initial = 2.0;
  double abstol = 0.01;
};

using Sigma2Policy = std::variant<FixedSigma2, IteratedSigma2>;

/// fit_unimodal or fit_with_sigma_iteration, depending on the policy.
UnimodalFit fit_unimodal(const BSplineBasis& basis, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y, const PenaltySpec& penalty,
                         const Sigma2Policy& sigma2, const LambdaPolicy& policy = reml_default(),
                         int threads = 1);

/// Predictor value where a unimodal spline turns from rising to falling.
/// Returns the lower bound for a falling spline, the upper bound for a
/// rising one, and nothing when the derivative vanishes everywhere.
std::optional<double> turning_point(const SplineFunction& spline, double tolerance = 1e-8);

}  // namespace peakforge
