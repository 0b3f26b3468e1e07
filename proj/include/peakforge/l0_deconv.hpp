#pragma once

#include <Eigen/Dense>
#include <variant>

#include "peakforge/spline_basis.hpp"

namespace peakforge {

/// Single-wave parameters: U(t) = U0 (1 - exp(-t/xi1)) exp(-t/xi2) for t >= 0.
struct WaveParams {
  double U0 = 1.0;
  double xi1 = 1.0;
  double xi2 = 1.0;
};

double wave_eval(double t, const WaveParams& p);

/// gamma + n_p * wave_eval(t - t0, p).
double wave_eval_full(double t, double gamma, double n_p, double t0, const WaveParams& p);

/// Maximum of (1 - exp(-t/xi1)) exp(-t/xi2), attained at xi1 ln((xi1 + xi2) / xi1).
double wave_peak_factor(double xi1, double xi2);

/// Shapes are sampled at the lags 0, 1, ..., n_g - 1 (sample units).
struct TabulatedShape {
  Eigen::VectorXd g;
};

struct ParametricShape {
  WaveParams params;
  int n_g = 1;
};

/// Spline whose basis domain is [0, n_g - 1].
struct UnimodalShape {
  SplineFunction spline;
  int n_g = 1;
};

using PeakShape = std::variant<TabulatedShape, ParametricShape, UnimodalShape>;

int shape_length(const PeakShape& shape);

/// Shape values at the lags, scaled so that the maximum is 1.
Eigen::VectorXd shape_values(const PeakShape& shape);

/// n x (n + n_g - 1) matrix with (G a)_i = sum_l g_l a_{i - l + n_g - 1}.
/// Column c holds g starting at row c - n_g + 1, i.e. a pulse at time
/// c - n_g + 1; pulses at negative times model peaks that began before the
/// first sample.
Eigen::MatrixXd build_conv_matrix(const Eigen::VectorXd& g, int n);
Eigen::MatrixXd build_conv_matrix(const PeakShape& shape, int n);

/// Sample index of the peak start for pulse column c.
inline int pulse_time(int column, int n_g) { return column - n_g + 1; }

struct PulseSolution {
  Eigen::VectorXd pulses;  // response units
  double kappa = 0.0;
  int nonzero_count = 0;
  Eigen::VectorXd fitted;
  int iterations = 0;
  bool converged = true;
};

inline constexpr double default_kappa = 0.017;
inline constexpr double pulse_zero_threshold = 1e-4;

/// Adaptive-ridge approximation of min ||y - G a||^2 + kappa ||a||_0 with
/// a >= 0. y is divided by its maximum internally; pulses and fitted values
/// are returned in the units of y.
PulseSolution l0_fit_pulses(const Eigen::MatrixXd& G, const Eigen::VectorXd& y, double kappa);

struct ScaleRecord {
  double min = 0.0;
  double range = 1.0;
};

struct ScaledSignal {
  Eigen::VectorXd values;
  ScaleRecord record;
};

/// (y - min) / (max - min).
ScaledSignal preprocess_signal(const Eigen::VectorXd& y);

/// Inverse of preprocess_signal for fitted values.
Eigen::VectorXd back_transform(const Eigen::VectorXd& scaled, const ScaleRecord& record);

struct BlindOptions {
  double kappa = default_kappa;
  int max_outer = 50;
  double tolerance = 1e-5;
};

struct BlindResult {
  PeakShape shape;
  PulseSolution pulses;
  double rss = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  // all pulses vanished; the last shape update was skipped
};

/// Alternates pulse estimation and shape estimation. The variant of `initial`
/// selects the shape model: tabulated -> pointwise least squares, parametric
/// -> Levenberg-Marquardt on log-parameters, unimodal -> unimodal spline
/// regression with a second-order difference penalty.
BlindResult blind_deconv(const Eigen::VectorXd& y, const PeakShape& initial,
                         const BlindOptions& options = {});

/// Pulse heights converted to wave amplitudes: the signal equals
/// sum_c amplitude_c * (1 - exp(-l/xi1)) exp(-l/xi2) over shifted lags.
Eigen::VectorXd wave_amplitudes(const PulseSolution& pulses, const ParametricShape& shape);

}  // namespace peakforge
