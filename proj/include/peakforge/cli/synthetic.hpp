#pragma once

#include <cstdint>
#include <vector>

#include "peakforge/cli/signal_io.hpp"
#include "peakforge/l0_deconv.hpp"

namespace peakforge::cli {

struct SyntheticData {
  SignalRecord record;
  Table truth;
};

/// Dives: depth (positive down) 0 at the surface, each dive a unimodal
/// excursion depth * sin(pi u)^shape over its duration, separated by surface
/// intervals. Truth columns: start, end (indices), bottom_time, max_depth.
struct DiveOptions {
  int dives = 5;
  int min_duration = 60;
  int max_duration = 120;
  int surface_gap = 40;
  double min_depth = 10.0;
  double max_depth = 40.0;
  double noise_sd = 0.3;
};

SyntheticData generate_dive(const DiveOptions& options, std::uint64_t seed);

/// Accumulated single waves at random integer arrival times, each scaled by a
/// photon count, plus Gaussian noise with sd = noise_fraction * noiseless max.
/// Truth columns: time, photons, amplitude.
struct PulseOptions {
  int pulses = 7;
  int samples = 300;
  WaveParams wave{17.41, 4.745, 31.81};
  int min_photons = 1;
  int max_photons = 3;
  int min_spacing = 15;
  int first_time = 5;
  int last_time = 200;
  double baseline = 0.0;
  double noise_fraction = 0.02;
};

SyntheticData generate_pulses(const PulseOptions& options, std::uint64_t seed);

/// height * exp(-(x - center)^2 / (2 width^2)).
struct Bump {
  double center = 0.0;
  double height = 1.0;
  double width = 1.0;
};

double bump_eval(double x, const Bump& bump);

/// Sum of bumps on x plus N(0, noise_sd^2). Truth columns: center, height, width.
SyntheticData generate_bumps(const Eigen::VectorXd& x, const std::vector<Bump>& bumps,
                             double noise_sd, std::uint64_t seed);

/// Spectrum-like signal on [lower, upper]: a fixed early bump near 0.5 plus
/// `peaks` bumps with random centres, heights and widths (diverse widths,
/// centres at least min_separation apart), over a near-zero baseline.
struct SpectrumOptions {
  int samples = 800;
  double lower = 0.4;
  double upper = 1.2;
  int peaks = 4;
  Bump early{0.5, 1.0, 0.008};
  double min_height = 0.2;
  double max_height = 0.8;
  double min_width = 0.004;
  double max_width = 0.02;
  double min_separation = 0.06;
  double noise_sd = 0.005;
};

SyntheticData generate_spectrum(const SpectrumOptions& options, std::uint64_t seed);

}  // namespace peakforge::cli
