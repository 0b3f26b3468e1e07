#include "peakforge/l0_deconv.hpp"

#include <cmath>
#include <limits>

#include "peakforge/error.hpp"
#include "peakforge/unimodal_regression.hpp"

namespace peakforge {

using detail::require;

namespace {

constexpr double adaptive_beta = 1e-5;
constexpr double positivity_weight = 1e6;
constexpr double pulse_tolerance = 1e-6;
constexpr int pulse_iterations = 100;

Eigen::VectorXd lags(int n_g) { return Eigen::VectorXd::LinSpaced(n_g, 0.0, n_g - 1.0); }

Eigen::VectorXd raw_wave(const WaveParams& p, int n_g) {
  Eigen::VectorXd g(n_g);
  for (int l = 0; l < n_g; ++l) g[l] = wave_eval(l, p);
  return g;
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError("pulse normal equations are singular");
  Eigen::VectorXd out = llt.solve(rhs);
  if (!out.allFinite()) throw NumericalError("pulse normal equations are singular");
  return out;
}

// A(i, l) = a_{i - l + n_g - 1}, so that A g = G(g) a.
Eigen::MatrixXd pulse_matrix(const Eigen::VectorXd& a, int n, int n_g) {
  Eigen::MatrixXd out(n, n_g);
  for (int l = 0; l < n_g; ++l) {
    for (int i = 0; i < n; ++i) out(i, l) = a[i - l + n_g - 1];
  }
  return out;
}

// Levenberg-Marquardt on log(U0, xi1, xi2) for min ||y - A g(theta)||^2,
// written through A'A and A'y.
WaveParams fit_wave(const Eigen::MatrixXd& ata, const Eigen::VectorXd& aty, const WaveParams& start,
                    int n_g) {
  Eigen::Vector3d theta(std::log(start.U0), std::log(start.xi1), std::log(start.xi2));
  const auto params = [](const Eigen::Vector3d& t) {
    return WaveParams{std::exp(t[0]), std::exp(t[1]), std::exp(t[2])};
  };
  const auto objective = [&](const Eigen::VectorXd& g) { return g.dot(ata * g) - 2.0 * g.dot(aty); };

  WaveParams p = params(theta);
  Eigen::VectorXd g = raw_wave(p, n_g);
  double f = objective(g);
  double mu = 1e-3;
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::MatrixXd jac(n_g, 3);
    for (int l = 0; l < n_g; ++l) {
      const double x = l;
      const double rise = std::exp(-x / p.xi1);
      const double decay = std::exp(-x / p.xi2);
      jac(l, 0) = g[l];
      jac(l, 1) = -p.U0 * (x / p.xi1) * rise * decay;
      jac(l, 2) = g[l] * x / p.xi2;
    }
    const Eigen::Matrix3d jtj = jac.transpose() * ata * jac;
    const Eigen::Vector3d grad = jac.transpose() * (aty - ata * g);
    bool improved = false;
    for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
      Eigen::Matrix3d damped = jtj;
      damped.diagonal() += mu * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Vector3d step = damped.ldlt().solve(grad);
      if (!step.allFinite()) {
        mu *= 10.0;
        continue;
      }
      const Eigen::Vector3d candidate = theta + step.cwiseMax(-2.0).cwiseMin(2.0);
      const WaveParams cp = params(candidate);
      const Eigen::VectorXd cg = raw_wave(cp, n_g);
      const double cf = objective(cg);
      if (std::isfinite(cf) && cf < f) {
        const double gain = f - cf;
        theta = candidate;
        p = cp;
        g = cg;
        f = cf;
        mu = std::max(mu / 3.0, 1e-12);
        improved = true;
        if (gain <= 1e-14 * (std::abs(f) + aty.squaredNorm() + 1.0) || step.norm() < 1e-10) return p;
      } else {
        mu *= 4.0;
      }
    }
    if (!improved) break;
  }
  return p;
}

}  // namespace

double wave_eval(double t, const WaveParams& p) {
  if (!(t > 0.0)) return 0.0;
  return p.U0 * (1.0 - std::exp(-t / p.xi1)) * std::exp(-t / p.xi2);
}

double wave_eval_full(double t, double gamma, double n_p, double t0, const WaveParams& p) {
  require(n_p >= 0.0, "photon count must be non-negative");
  return gamma + n_p * wave_eval(t - t0, p);
}

double wave_peak_factor(double xi1, double xi2) {
  require(xi1 > 0.0 && xi2 > 0.0, "wave constants must be positive");
  const double t = xi1 * std::log((xi1 + xi2) / xi1);
  return (1.0 - std::exp(-t / xi1)) * std::exp(-t / xi2);
}

int shape_length(const PeakShape& shape) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TabulatedShape>) return static_cast<int>(s.g.size());
        else return s.n_g;
      },
      shape);
}

Eigen::VectorXd shape_values(const PeakShape& shape) {
  const int n_g = shape_length(shape);
  require(n_g >= 1, "peak shape needs at least one sample");
  Eigen::VectorXd g = std::visit(
      [n_g](const auto& s) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TabulatedShape>) {
          return s.g;
        } else if constexpr (std::is_same_v<T, ParametricShape>) {
          require(s.params.U0 > 0.0 && s.params.xi1 > 0.0 && s.params.xi2 > 0.0,
                  "wave parameters must be positive");
          return raw_wave(s.params, n_g);
        } else {
          const auto& basis = s.spline.basis();
          require(n_g >= 2 && basis.lower() == 0.0 && basis.upper() == n_g - 1.0,
                  "spline peak shape must live on [0, n_g - 1]");
          return s.spline.eval(lags(n_g));
        }
      },
      shape);
  require(g.allFinite(), "peak shape values must be finite");
  const double top = g.maxCoeff();
  if (!(top > 0.0)) throw NumericalError("peak shape has no positive values");
  return g / top;
}

Eigen::MatrixXd build_conv_matrix(const Eigen::VectorXd& g, int n) {
  const int n_g = static_cast<int>(g.size());
  require(n_g >= 1, "peak shape needs at least one sample");
  require(n >= n_g, "peak shape is longer than the signal");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n + n_g - 1);
  for (int c = 0; c < n + n_g - 1; ++c) {
    const int start = pulse_time(c, n_g);
    for (int l = std::max(0, -start); l < n_g && start + l < n; ++l) out(start + l, c) = g[l];
  }
  return out;
}

Eigen::MatrixXd build_conv_matrix(const PeakShape& shape, int n) {
  return build_conv_matrix(shape_values(shape), n);
}

PulseSolution l0_fit_pulses(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, double kappa) {
  require(G.rows() == y.size() && y.size() > 0, "convolution matrix and signal lengths differ");
  require(std::isfinite(kappa) && kappa > 0.0, "kappa must be positive");
  require(y.allFinite() && G.allFinite(), "signal and convolution matrix must be finite");
  const double scale = y.maxCoeff();
  require(scale > 0.0, "signal has no positive values");

  const Eigen::MatrixXd gtg = G.transpose() * G;
  const Eigen::VectorXd gty = G.transpose() * (y / scale);
  const Eigen::Index p = G.cols();

  Eigen::MatrixXd system = gtg;
  system.diagonal().array() += kappa;
  Eigen::VectorXd a = solve_spd(system, gty);

  PulseSolution out;
  out.kappa = kappa;
  out.converged = false;
  for (int iter = 1; iter <= pulse_iterations; ++iter) {
    system = gtg;
    for (Eigen::Index j = 0; j < p; ++j) {
      system(j, j) += kappa / (a[j] * a[j] + adaptive_beta * adaptive_beta) +
                      (a[j] < 0.0 ? positivity_weight : 0.0);
    }
    const Eigen::VectorXd next = solve_spd(system, gty);
    const double change = (next - a).cwiseAbs().maxCoeff();
    a = next;
    out.iterations = iter;
    if (change < pulse_tolerance) {
      out.converged = true;
      break;
    }
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    if (a[j] < pulse_zero_threshold) a[j] = 0.0;
  }
  out.pulses = a * scale;
  out.nonzero_count = static_cast<int>((out.pulses.array() != 0.0).count());
  out.fitted = G * out.pulses;
  return out;
}

ScaledSignal preprocess_signal(const Eigen::VectorXd& y) {
  require(y.size() > 0, "signal is empty");
  require(y.allFinite(), "signal must be finite");
  const double lo = y.minCoeff();
  const double hi = y.maxCoeff();
  require(hi > lo, "signal is constant");
  return {(y.array() - lo) / (hi - lo), {lo, hi - lo}};
}

Eigen::VectorXd back_transform(const Eigen::VectorXd& scaled, const ScaleRecord& record) {
  return (scaled.array() * record.range + record.min).matrix();
}

BlindResult blind_deconv(const Eigen::VectorXd& y, const PeakShape& initial,
                         const BlindOptions& options) {
  require(options.max_outer >= 1, "max_outer must be at least 1");
  require(options.tolerance > 0.0, "tolerance must be positive");
  const int n = static_cast<int>(y.size());
  const int n_g = shape_length(initial);
  require(n >= n_g, "peak shape is longer than the signal");

  BlindResult out{initial, {}, 0.0, 0, false, false};
  double previous = std::numeric_limits<double>::infinity();
  for (int outer = 1; outer <= options.max_outer; ++outer) {
    out.pulses = l0_fit_pulses(build_conv_matrix(out.shape, n), y, options.kappa);
    out.rss = (y - out.pulses.fitted).squaredNorm();
    out.iterations = outer;
    if (std::isfinite(previous) &&
        std::abs(previous - out.rss) <= options.tolerance * std::max(previous, 1e-300)) {
      out.converged = true;
      break;
    }
    previous = out.rss;
    if (outer == options.max_outer) break;
    if (out.pulses.nonzero_count == 0) {
      out.degenerate = true;
      break;
    }

    const Eigen::MatrixXd a_mat = pulse_matrix(out.pulses.pulses, n, n_g);
    std::visit(
        [&](auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, TabulatedShape>) {
            Eigen::VectorXd g = a_mat.completeOrthogonalDecomposition().solve(y);
            const double top = g.maxCoeff();
            if (top > 0.0 && g.allFinite()) s.g = g / top;
            else out.degenerate = true;
          } else if constexpr (std::is_same_v<T, ParametricShape>) {
            const Eigen::MatrixXd ata = a_mat.transpose() * a_mat;
            s.params = fit_wave(ata, a_mat.transpose() * y, s.params, n_g);
          } else {
            const auto& basis = s.spline.basis();
            const int d = basis.dimension();
            const Eigen::MatrixXd design = a_mat * basis.design_matrix(lags(n_g));
            const auto penalty =
                d >= 3 ? PenaltySpec::second_order_difference(d) : PenaltySpec::ridge(d);
            const double sigma2 = std::max(out.rss / n, 1e-12 * y.squaredNorm() / n + 1e-300);
            const UnimodalSolver solver(design, penalty, sigma2);
            const auto fit = solver.fit_unimodal(y, reml_default());
            if (fit.coefficients.maxCoeff() > 0.0) s.spline = SplineFunction(basis, fit.coefficients);
            else out.degenerate = true;
          }
        },
        out.shape);
    if (out.degenerate) break;
  }
  return out;
}

Eigen::VectorXd wave_amplitudes(const PulseSolution& pulses, const ParametricShape& shape) {
  const Eigen::VectorXd g = raw_wave(shape.params, shape.n_g) / shape.params.U0;
  const double top = g.maxCoeff();
  if (!(top > 0.0)) throw NumericalError("wave has no positive samples");
  return pulses.pulses / top;
}

}  // namespace peakforge
