#include "peakforge/varying_deconv.hpp"

#include <cmath>
#include <exception>
#include <thread>

#include "peakforge/error.hpp"
#include "peakforge/unimodal_regression.hpp"

namespace peakforge {

using detail::require;

namespace {

constexpr double adaptive_beta = 1e-5;
constexpr double zero_threshold = 1e-4;
constexpr double outer_tolerance = 1e-3;
constexpr int inner_iterations = 5;

struct UnitMap {
  Eigen::VectorXd values;
  double min = 0.0;
  double range = 0.0;  // 0 marks a degenerate all-zero column
};

UnitMap unit_map(const Eigen::VectorXd& z) {
  const double lo = z.minCoeff();
  const double hi = z.maxCoeff();
  if (lo < hi) return {(z.array() - lo) / (hi - lo), lo, hi - lo};
  if (hi != 0.0) return {z / hi, 0.0, hi};
  return {Eigen::VectorXd::Zero(z.size()), 0.0, 0.0};
}

Eigen::VectorXd solve_pd(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError("pulse system is singular");
  Eigen::VectorXd out = llt.solve(rhs);
  if (!out.allFinite()) throw NumericalError("pulse system is singular");
  return out;
}

Eigen::MatrixXd weighted(const Eigen::MatrixXd& gtg, const Eigen::VectorXd& a, double scale) {
  Eigen::MatrixXd out = gtg;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    out(j, j) += scale / (a[j] * a[j] + adaptive_beta * adaptive_beta);
  }
  return out;
}

void zero_small(Eigen::VectorXd& a) {
  for (auto& v : a) {
    if (v < zero_threshold) v = 0.0;
  }
}

}  // namespace

Eigen::VectorXd unit_scale(const Eigen::VectorXd& z) {
  require(z.size() > 0, "vector is empty");
  require(z.allFinite(), "vector must be finite");
  auto mapped = unit_map(z);
  require(mapped.range != 0.0, "cannot unit-scale an all-zero vector");
  return mapped.values;
}

VaryingDecoResult varying_l0_fit(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                 const VaryingOptions& options) {
  require(x.size() == y.size(), "x and y must have equal length");
  require(x.size() >= 2, "need at least two observations");
  require(x.allFinite() && y.allFinite(), "series must be finite");
  for (Eigen::Index i = 1; i < x.size(); ++i) require(x[i] > x[i - 1], "x must be strictly increasing");
  require(std::isfinite(options.kappa) && options.kappa > 0.0, "kappa must be positive");
  require(std::isfinite(options.sigma2) && options.sigma2 > 0.0, "sigma2 must be positive");
  require(options.max_outer >= 1, "max_outer must be at least 1");

  VaryingDecoResult out;
  const auto y_map = unit_map(y);
  require(y_map.range != 0.0, "response is identically zero");
  const Eigen::VectorXd yu = y_map.values;
  out.y_min = y_map.min;
  out.y_range = y_map.range;

  const auto basis = build_basis(x[0], x[x.size() - 1], options.q, options.k);
  const int d = basis.dimension();
  const Eigen::MatrixXd design = basis.design_matrix(x);
  const UnimodalSolver solver(design, PenaltySpec::ridge(d),
                              options.sigma2 / (y_map.range * y_map.range));
  const auto grid = default_lambda_grid();

  const Eigen::Index n = x.size();
  out.G.resize(n, d);
  out.coefficients.resize(d, d);
  out.column_min.resize(d);
  out.column_range.resize(d);
  auto store = [&](int j, const Eigen::VectorXd& beta) {
    const auto mapped = unit_map(design * beta);
    out.G.col(j) = mapped.values;
    out.coefficients.col(j) = beta;
    out.column_min[j] = mapped.min;
    out.column_range[j] = mapped.range;
  };

  // Initialization: every fixed-mode fit targets the same response, so one
  // REML choice serves all of them.
  const double lambda0 = solver.reml_select_lambda(yu, grid);
  const int threads = std::clamp(options.threads, 1, d);
  {
    std::vector<std::exception_ptr> errors(threads);
    auto work = [&](int t) {
      try {
        for (int j = t; j < d; j += threads) store(j, solver.fit_fixed_mode(yu, j, lambda0));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
      for (auto& worker : pool) worker.join();
    }
    for (const auto& error : errors) {
      if (error) std::rethrow_exception(error);
    }
  }

  Eigen::MatrixXd gtg = out.G.transpose() * out.G;
  Eigen::VectorXd gty = out.G.transpose() * yu;
  Eigen::MatrixXd system = gtg;
  system.diagonal().array() += options.kappa;
  Eigen::VectorXd a = solve_pd(system, gty);
  a = solve_pd(weighted(gtg, a, 1.0), gty);
  zero_small(a);
  if ((a.array() == 0.0).all()) {
    throw NumericalError("no active peaks after initialization; kappa is too large");
  }

  for (int outer = 1; outer <= options.max_outer; ++outer) {
    const Eigen::VectorXd a_old = a;
    std::vector<bool> in_neighbourhood(d, false);
    for (int l = 0; l < d; ++l) {
      if (a[l] == 0.0) continue;
      for (int j = std::max(0, l - 2); j <= std::min(d - 1, l + 2); ++j) in_neighbourhood[j] = true;
    }
    for (int j = 0; j < d; ++j) {
      if (!in_neighbourhood[j]) continue;
      Eigen::VectorXd without = a;
      without[j] = 0.0;
      const Eigen::VectorXd residual = yu - out.G * without;
      const double lambda = solver.reml_select_lambda(residual, grid);
      store(j, solver.fit_fixed_mode(residual, j, lambda));
      gtg = out.G.transpose() * out.G;
      gty = out.G.transpose() * yu;
      for (int i = 0; i < inner_iterations; ++i) a = solve_pd(weighted(gtg, a, options.kappa), gty);
      zero_small(a);
    }
    out.iterations = outer;
    if ((a_old - a).cwiseAbs().maxCoeff() < outer_tolerance) {
      out.converged = true;
      break;
    }
  }

  out.a = a;
  out.fitted = out.G * a;
  out.fitted_raw = (out.fitted.array() * out.y_range + out.y_min).matrix();
  for (int j = 0; j < d; ++j) {
    if (a[j] == 0.0) continue;
    out.active_set.push_back(j);
    VaryingPeak peak;
    peak.column = j;
    peak.height = a[j];
    peak.height_raw = a[j] * out.y_range;
    const auto top = turning_point(SplineFunction(basis, out.coefficients.col(j)));
    if (top) {
      peak.location = *top;
    } else {
      Eigen::Index arg = 0;
      out.G.col(j).maxCoeff(&arg);
      peak.location = x[arg];
    }
    out.peaks.push_back(peak);
  }
  return out;
}

double estimate_noise_from_window(const Eigen::VectorXd& y, int first, int last) {
  require(first >= 0 && last < y.size() && first <= last, "noise window is out of range");
  const int m = last - first + 1;
  require(m >= 30, "noise window needs at least 30 observations");
  const Eigen::VectorXd window = y.segment(first, m);
  require(window.allFinite(), "noise window must be finite");
  const double mean = window.mean();
  const double variance = (window.array() - mean).square().sum() / (m - 1);
  if (!(variance > 0.0)) {
    throw NumericalError("noise window is constant; supply sigma2 explicitly");
  }
  return variance;
}

}  // namespace peakforge
