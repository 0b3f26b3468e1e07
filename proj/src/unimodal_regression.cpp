#include "peakforge/unimodal_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include "peakforge/bounded_qp.hpp"
#include "peakforge/error.hpp"

namespace peakforge {

namespace {

// row i <- sum of rows i..end
Eigen::MatrixXd reverse_cumsum_rows(Eigen::MatrixXd m) {
  for (Eigen::Index i = m.rows() - 2; i >= 0; --i) m.row(i) += m.row(i + 1);
  return m;
}

Eigen::MatrixXd reverse_cumsum_cols(Eigen::MatrixXd m) {
  for (Eigen::Index j = m.cols() - 2; j >= 0; --j) m.col(j) += m.col(j + 1);
  return m;
}

Eigen::VectorXd reverse_cumsum(Eigen::VectorXd v) {
  for (Eigen::Index i = v.size() - 2; i >= 0; --i) v[i] += v[i + 1];
  return v;
}

// Mode-m coordinates: z_0 is the level, z_i >= 0 are the increment
// magnitudes, signed +1 up to the mode and -1 after it.
double increment_sign(int index, int mode) { return index <= mode ? 1.0 : -1.0; }

Eigen::VectorXd coefficients_from_increments(const Eigen::VectorXd& z, int mode) {
  Eigen::VectorXd beta(z.size());
  double level = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    level += (i == 0 ? 1.0 : increment_sign(static_cast<int>(i), mode)) * z[i];
    beta[i] = level;
  }
  return beta;
}

// Cone QP pieces shared by all modes at one lambda: Q0 = C'HC and r0 = C'c
// for the unsigned cumulative-sum map C.
struct ConeProblem {
  Eigen::MatrixXd q0;
  Eigen::VectorXd r0;
};

ModeFit solve_mode(const ConeProblem& cone, int mode) {
  const Eigen::Index d = cone.r0.size();
  Eigen::VectorXd sign(d);
  for (Eigen::Index i = 0; i < d; ++i) sign[i] = i == 0 ? 1.0 : increment_sign(static_cast<int>(i), mode);
  const Eigen::MatrixXd q = sign.asDiagonal() * cone.q0 * sign.asDiagonal();
  const Eigen::VectorXd r = sign.cwiseProduct(cone.r0);
  std::vector<bool> nonnegative(d, true);
  nonnegative[0] = false;
  const auto result = qp::solve_bounded_qp(q, r, nonnegative);
  ModeFit fit;
  fit.mode = mode;
  fit.coefficients = coefficients_from_increments(result.solution, mode);
  return fit;
}

}  // namespace

// ---------------------------------------------------------------------------
// PenaltySpec

PenaltySpec::PenaltySpec(PenaltyKind kind, Eigen::MatrixXd omega, Eigen::VectorXd beta0)
    : kind_(kind), omega_(std::move(omega)), beta0_(std::move(beta0)) {
  const Eigen::Index d = beta0_.size();
  detail::require(d >= 1, "penalty dimension must be >= 1");
  detail::require(omega_.rows() == d && omega_.cols() == d, "penalty matrix must be d x d");
  detail::require(omega_.allFinite() && beta0_.allFinite(), "penalty entries must be finite");
  const double scale = std::max(1.0, omega_.cwiseAbs().maxCoeff());
  detail::require((omega_ - omega_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
                  "penalty matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega_, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd values = eig.eigenvalues();
  const double largest = std::max(values.maxCoeff(), 0.0);
  detail::require(values.minCoeff() >= -1e-10 * std::max(1.0, largest),
                  "penalty matrix must be positive semidefinite");
  const double cutoff = 1e-10 * std::max(1.0, largest);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (values[i] > cutoff) {
      ++rank_;
      log_pdet_ += std::log(values[i]);
    }
  }
}

PenaltySpec PenaltySpec::ridge(int dimension) {
  detail::require(dimension >= 1, "penalty dimension must be >= 1");
  return PenaltySpec(PenaltyKind::ridge, Eigen::MatrixXd::Identity(dimension, dimension),
                     Eigen::VectorXd::Zero(dimension));
}

PenaltySpec PenaltySpec::second_order_difference(int dimension) {
  detail::require(dimension >= 3, "second-order difference penalty needs d >= 3");
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(dimension - 2, dimension);
  for (int i = 0; i < dimension - 2; ++i) {
    d2(i, i) = 1.0;
    d2(i, i + 1) = -2.0;
    d2(i, i + 2) = 1.0;
  }
  return PenaltySpec(PenaltyKind::second_order_difference, d2.transpose() * d2,
                     Eigen::VectorXd::Zero(dimension));
}

PenaltySpec PenaltySpec::against_parametric(Eigen::MatrixXd omega, Eigen::VectorXd beta0) {
  return PenaltySpec(PenaltyKind::against_parametric, std::move(omega), std::move(beta0));
}

double PenaltySpec::value(const Eigen::VectorXd& beta) const {
  const Eigen::VectorXd delta = beta - beta0_;
  return delta.dot(omega_ * delta);
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid(50);
  for (int i = 0; i < 50; ++i) grid[i] = std::pow(10.0, -6.0 + 12.0 * i / 49.0);
  return grid;
}

bool in_unimodal_cone(const Eigen::VectorXd& beta, int mode, double tolerance) {
  for (Eigen::Index i = 1; i < beta.size(); ++i) {
    const double step = beta[i] - beta[i - 1];
    if (i <= mode ? step < -tolerance : step > tolerance) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// UnimodalSolver

struct UnimodalSolver::SpectralCache {
  std::once_flag once;
  // Generalized eigenproblem Omega v = mu (B'B/sigma2) v with V'(B'B/sigma2)V = I.
  // Only available when B'B is positive definite.
  bool available = false;
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
  double log_det_gram = 0.0;
};

UnimodalSolver::UnimodalSolver(Eigen::MatrixXd design, PenaltySpec penalty, double sigma2)
    : design_(std::move(design)),
      penalty_(std::move(penalty)),
      sigma2_(sigma2),
      cache_(std::make_shared<SpectralCache>()) {
  detail::require(design_.rows() > 0 && design_.cols() > 0, "design matrix must be non-empty");
  detail::require(penalty_.dimension() == design_.cols(),
                  "penalty dimension must match the design's column count");
  detail::require(std::isfinite(sigma2_) && sigma2_ > 0.0, "sigma2 must be positive");
  gram_ = design_.transpose() * design_ / sigma2_;
}

const UnimodalSolver::SpectralCache& UnimodalSolver::spectral() const {
  std::call_once(cache_->once, [this] {
    Eigen::LLT<Eigen::MatrixXd> llt(gram_);
    if (llt.info() != Eigen::Success) return;
    const Eigen::VectorXd diag = Eigen::MatrixXd(llt.matrixL()).diagonal();
    if (diag.minCoeff() <= 1e-7 * diag.maxCoeff()) return;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(penalty_.omega(), gram_);
    if (eig.info() != Eigen::Success) return;
    cache_->vectors = eig.eigenvectors();
    cache_->values = eig.eigenvalues().cwiseMax(0.0);
    cache_->log_det_gram = 2.0 * diag.array().log().sum();
    cache_->available = true;
  });
  return *cache_;
}

double UnimodalSolver::rss(const Eigen::VectorXd& y, const Eigen::VectorXd& beta) const {
  return (y - design_ * beta).squaredNorm();
}

double UnimodalSolver::prss(const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                            double lambda) const {
  return rss(y, beta) / sigma2_ + lambda * penalty_.value(beta);
}

namespace {

ConeProblem make_cone(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& design,
                      const PenaltySpec& penalty, double sigma2, const Eigen::VectorXd& y,
                      double lambda) {
  const Eigen::MatrixXd hessian = gram + lambda * penalty.omega();
  const Eigen::VectorXd linear =
      design.transpose() * y / sigma2 + lambda * (penalty.omega() * penalty.beta0());
  return {reverse_cumsum_rows(reverse_cumsum_cols(hessian)), reverse_cumsum(linear)};
}

}  // namespace

Eigen::VectorXd UnimodalSolver::fit_fixed_mode(const Eigen::VectorXd& y, int mode,
                                               double lambda) const {
  detail::require(y.size() == design_.rows(), "response length must equal design rows");
  detail::require(mode >= 0 && mode < dimension(), "mode index out of range");
  detail::require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be >= 0");
  const auto cone = make_cone(gram_, design_, penalty_, sigma2_, y, lambda);
  return solve_mode(cone, mode).coefficients;
}

ModeFit UnimodalSolver::fit_all_modes(const Eigen::VectorXd& y, double lambda, int threads) const {
  detail::require(y.size() == design_.rows(), "response length must equal design rows");
  detail::require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be >= 0");
  const int d = dimension();
  const auto cone = make_cone(gram_, design_, penalty_, sigma2_, y, lambda);

  std::vector<ModeFit> fits(d);
  auto work = [&](int first, int stride) {
    for (int m = first; m < d; m += stride) {
      fits[m] = solve_mode(cone, m);
      fits[m].lambda = lambda;
      fits[m].rss = rss(y, fits[m].coefficients);
      fits[m].prss = fits[m].rss / sigma2_ + lambda * penalty_.value(fits[m].coefficients);
    }
  };
  threads = std::clamp(threads, 1, d);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          work(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& worker : pool) worker.join();
    for (const auto& error : errors) {
      if (error) std::rethrow_exception(error);
    }
  }

  // Sequential reduction: a later mode wins only if clearly better.
  const double floor = 1e-14 * y.squaredNorm();
  int best = 0;
  for (int m = 1; m < d; ++m) {
    if (fits[m].rss < fits[best].rss - 1e-10 * fits[best].rss - floor) best = m;
  }
  return fits[best];
}

ModeFit UnimodalSolver::fit_unimodal(const Eigen::VectorXd& y, const LambdaPolicy& policy,
                                     int threads) const {
  double lambda = 0.0;
  if (const auto* fixed = std::get_if<FixedLambda>(&policy)) {
    lambda = fixed->value;
  } else {
    lambda = reml_select_lambda(y, std::get<RemlLambda>(policy).grid);
  }
  return fit_all_modes(y, lambda, threads);
}

double UnimodalSolver::restricted_log_likelihood(const Eigen::VectorXd& y, double lambda) const {
  detail::require(y.size() == design_.rows(), "response length must equal design rows");
  detail::require(std::isfinite(lambda) && lambda > 0.0, "REML lambda must be positive");
  const double n = static_cast<double>(design_.rows());
  const double d = static_cast<double>(dimension());
  const double rank = static_cast<double>(penalty_.rank());
  const double log_2pi = std::log(2.0 * std::numbers::pi);

  const Eigen::VectorXd residual = y - design_ * penalty_.beta0();
  const Eigen::VectorXd score = design_.transpose() * residual / sigma2_;

  double log_det_h = 0.0;
  double explained = 0.0;
  const auto& spec = spectral();
  if (spec.available) {
    const Eigen::VectorXd projected = spec.vectors.transpose() * score;
    log_det_h = spec.log_det_gram;
    for (Eigen::Index i = 0; i < projected.size(); ++i) {
      const double scale = 1.0 + lambda * spec.values[i];
      log_det_h += std::log(scale);
      explained += projected[i] * projected[i] / scale;
    }
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(gram_ + lambda * penalty_.omega());
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd diag = Eigen::MatrixXd(llt.matrixL()).diagonal();
    if (diag.minCoeff() <= 1e-7 * diag.maxCoeff()) return -std::numeric_limits<double>::infinity();
    log_det_h = 2.0 * diag.array().log().sum();
    explained = score.dot(llt.solve(score));
  }
  const double quadratic = residual.squaredNorm() / sigma2_ - explained;
  return -0.5 * n * (log_2pi + std::log(sigma2_)) + 0.5 * (d - rank) * log_2pi +
         0.5 * rank * std::log(lambda) + 0.5 * penalty_.log_pseudo_determinant() -
         0.5 * log_det_h - 0.5 * quadratic;
}

double UnimodalSolver::reml_select_lambda(const Eigen::VectorXd& y,
                                          const std::vector<double>& grid) const {
  detail::require(!grid.empty(), "lambda grid must be non-empty");
  for (double value : grid) {
    detail::require(std::isfinite(value) && value > 0.0, "lambda grid entries must be positive");
  }
  double best_lambda = 0.0;
  double best_value = -std::numeric_limits<double>::infinity();
  bool any_finite = false;
  for (double value : grid) {
    const double ll = restricted_log_likelihood(y, value);
    if (!std::isfinite(ll)) continue;
    if (!any_finite || ll > best_value) {
      best_value = ll;
      best_lambda = value;
      any_finite = true;
    }
  }
  if (!any_finite) {
    throw NumericalError("REML: restricted likelihood is singular for every lambda on the grid");
  }
  return best_lambda;
}

double UnimodalSolver::effective_df(double lambda) const {
  const auto& spec = spectral();
  if (spec.available) {
    return (1.0 / (1.0 + lambda * spec.values.array())).sum();
  }
  const Eigen::MatrixXd hessian = gram_ + lambda * penalty_.omega();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
  if (ldlt.info() != Eigen::Success) throw NumericalError("edf: singular penalized system");
  return ldlt.solve(gram_).trace();
}

// ---------------------------------------------------------------------------
// Spline-level API

namespace {

UnimodalFit to_fit(const BSplineBasis& basis, const ModeFit& mode_fit, double sigma2,
                   double edf) {
  UnimodalFit fit{SplineFunction(basis, mode_fit.coefficients)};
  fit.mode = mode_fit.mode;
  fit.lambda = mode_fit.lambda;
  fit.sigma2 = sigma2;
  fit.rss = mode_fit.rss;
  fit.prss = mode_fit.prss;
  fit.edf = edf;
  return fit;
}

}  // namespace

UnimodalFit fit_unimodal(const BSplineBasis& basis, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y, const PenaltySpec& penalty, double sigma2,
                         const LambdaPolicy& policy, int threads) {
  detail::require(x.size() == y.size(), "x and y must have equal length");
  UnimodalSolver solver(basis.design_matrix(x), penalty, sigma2);
  const auto mode_fit = solver.fit_unimodal(y, policy, threads);
  return to_fit(basis, mode_fit, sigma2, solver.effective_df(mode_fit.lambda));
}

UnimodalFit fit_with_sigma_iteration(const BSplineBasis& basis, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& y, const PenaltySpec& penalty,
                                     double sigma2_init, double abstol,
                                     const LambdaPolicy& policy, int threads) {
  detail::require(x.size() == y.size(), "x and y must have equal length");
  detail::require(std::isfinite(sigma2_init) && sigma2_init > 0.0, "initial sigma2 must be > 0");
  detail::require(std::isfinite(abstol) && abstol > 0.0, "abstol must be > 0");
  constexpr int kMaxAlternations = 100;

  const Eigen::MatrixXd design = basis.design_matrix(x);
  const double n = static_cast<double>(y.size());
  const double sigma2_floor =
      std::max(1e-12 * y.squaredNorm() / n, std::numeric_limits<double>::min());

  double sigma2 = sigma2_init;
  for (int iteration = 1; iteration <= kMaxAlternations; ++iteration) {
    UnimodalSolver solver(design, penalty, sigma2);
    const auto mode_fit = solver.fit_unimodal(y, policy, threads);
    const double edf = solver.effective_df(mode_fit.lambda);
    if (n - edf <= 0.0) throw NumericalError("sigma2 iteration: no residual degrees of freedom");
    const double updated = std::max(mode_fit.rss / (n - edf), sigma2_floor);
    const bool done = std::abs(updated - sigma2) < abstol;
    if (done || iteration == kMaxAlternations) {
      auto fit = to_fit(basis, mode_fit, updated, edf);
      fit.sigma_iterations = iteration;
      fit.converged = done;
      return fit;
    }
    sigma2 = updated;
  }
  throw NumericalError("unreachable");
}

UnimodalFit fit_unimodal(const BSplineBasis& basis, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y, const PenaltySpec& penalty,
                         const Sigma2Policy& sigma2, const LambdaPolicy& policy, int threads) {
  if (const auto* fixed = std::get_if<FixedSigma2>(&sigma2)) {
    return fit_unimodal(basis, x, y, penalty, fixed->value, policy, threads);
  }
  const auto& iterated = std::get<IteratedSigma2>(sigma2);
  return fit_with_sigma_iteration(basis, x, y, penalty, iterated.initial, iterated.abstol, policy,
                                  threads);
}

std::optional<double> turning_point(const SplineFunction& spline, double tolerance) {
  const SplineFunction slope = spline.derivative();
  const auto& basis = spline.basis();
  const double a = basis.lower();
  const double b = basis.upper();
  const double threshold = 1e-12 * std::max(1.0, slope.coefficients().cwiseAbs().maxCoeff());

  // Probe several points per knot interval; the sign pattern of the slope
  // coefficients allows at most one change from positive to negative.
  const int intervals = (basis.inner_knots() + 1) * 8;
  int last_positive = -1;
  int first_negative_after = -1;
  bool any_negative = false;
  auto site = [&](int i) { return i == intervals ? b : a + (b - a) * i / intervals; };
  for (int i = 0; i <= intervals; ++i) {
    const double value = slope(site(i));
    if (value > threshold) {
      last_positive = i;
      first_negative_after = -1;
    } else if (value < -threshold) {
      any_negative = true;
      if (last_positive >= 0 && first_negative_after < 0) first_negative_after = i;
    }
  }
  if (last_positive < 0) return any_negative ? std::optional<double>(a) : std::nullopt;
  if (first_negative_after < 0) return b;

  double lo = site(last_positive);
  double hi = site(first_negative_after);
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (slope(mid) > threshold) {
      lo = mid;
    } else if (slope(mid) < -threshold) {
      hi = mid;
    } else {
      return mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace peakforge
