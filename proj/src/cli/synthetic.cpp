#include "peakforge/cli/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "peakforge/error.hpp"
#include "peakforge/random.hpp"

namespace peakforge::cli {

using detail::require;

namespace {

// `count` sorted values in [lo, hi] at least `spacing` apart.
std::vector<double> spaced_uniform(Rng& rng, int count, double lo, double hi, double spacing) {
  const double slack = (hi - lo) - (count - 1) * spacing;
  require(count == 0 || slack >= 0.0, "spacing constraints are infeasible");
  std::vector<double> out(count);
  for (auto& v : out) v = rng.uniform(0.0, slack);
  std::sort(out.begin(), out.end());
  for (int i = 0; i < count; ++i) out[i] += lo + i * spacing;
  return out;
}

KeyValues base_metadata(const std::string& archetype, std::uint64_t seed) {
  return {{"source", "synthetic"}, {"archetype", archetype}, {"seed", std::to_string(seed)}};
}

}  // namespace

SyntheticData generate_dive(const DiveOptions& o, std::uint64_t seed) {
  require(o.dives >= 0, "dive count must be non-negative");
  require(o.min_duration >= 3 && o.max_duration >= o.min_duration, "invalid dive durations");
  require(o.surface_gap >= 1, "surface gap must be positive");
  require(o.min_depth > 0.0 && o.max_depth >= o.min_depth, "invalid dive depths");
  require(o.noise_sd >= 0.0, "noise sd must be non-negative");
  Rng rng(seed);

  std::vector<double> depth(o.surface_gap, 0.0);
  SyntheticData out;
  out.truth.columns = {"start", "end", "bottom_time", "max_depth"};
  for (int k = 0; k < o.dives; ++k) {
    const int duration = static_cast<int>(rng.uniform_int(o.min_duration, o.max_duration));
    const double max_depth = rng.uniform(o.min_depth, o.max_depth);
    const double shape = rng.uniform(0.6, 1.4);
    const int start = static_cast<int>(depth.size());
    for (int i = 0; i <= duration; ++i) {
      const double u = static_cast<double>(i) / duration;
      depth.push_back(max_depth * std::pow(std::sin(std::numbers::pi * u), shape));
    }
    const int end = static_cast<int>(depth.size()) - 1;
    out.truth.rows.push_back({double(start), double(end), start + duration / 2.0, max_depth});
    depth.insert(depth.end(), o.surface_gap, 0.0);
  }
  const auto n = static_cast<Eigen::Index>(depth.size());
  out.record.x = Eigen::VectorXd::LinSpaced(n, 0.0, n - 1.0);
  out.record.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.record.y[i] = depth[i] + rng.normal(0.0, o.noise_sd);
  out.record.metadata = base_metadata("dive", seed);
  out.record.metadata.emplace_back("units", "s,m");
  return out;
}

SyntheticData generate_pulses(const PulseOptions& o, std::uint64_t seed) {
  require(o.pulses >= 0, "pulse count must be non-negative");
  require(o.samples >= 10, "need at least 10 samples");
  require(o.first_time >= 0 && o.last_time < o.samples && o.first_time <= o.last_time,
          "arrival window must lie inside the series");
  require(o.min_photons >= 1 && o.max_photons >= o.min_photons, "invalid photon range");
  require(o.wave.U0 > 0.0 && o.wave.xi1 > 0.0 && o.wave.xi2 > 0.0, "wave parameters must be positive");
  require(o.noise_fraction >= 0.0, "noise fraction must be non-negative");
  Rng rng(seed);

  // Integer times with the spacing: draw on the reduced grid, then spread.
  const int slack = (o.last_time - o.first_time) - (o.pulses - 1) * o.min_spacing;
  require(o.pulses == 0 || slack >= 0, "spacing constraints are infeasible");
  std::vector<int> times(o.pulses);
  for (auto& t : times) t = static_cast<int>(rng.uniform_int(0, slack));
  std::sort(times.begin(), times.end());
  for (int i = 0; i < o.pulses; ++i) times[i] += o.first_time + i * o.min_spacing;

  SyntheticData out;
  out.truth.columns = {"time", "photons", "amplitude"};
  Eigen::VectorXd clean = Eigen::VectorXd::Zero(o.samples);
  for (int t : times) {
    const double photons = static_cast<double>(rng.uniform_int(o.min_photons, o.max_photons));
    for (int i = 0; i < o.samples; ++i) clean[i] += wave_eval_full(i, 0.0, photons, t, o.wave);
    out.truth.rows.push_back({double(t), photons, photons * o.wave.U0});
  }
  const double sd = o.noise_fraction * (o.pulses > 0 ? clean.maxCoeff() : o.wave.U0);
  out.record.x = Eigen::VectorXd::LinSpaced(o.samples, 0.0, o.samples - 1.0);
  out.record.y.resize(o.samples);
  for (int i = 0; i < o.samples; ++i) out.record.y[i] = o.baseline + clean[i] + rng.normal(0.0, sd);
  out.record.metadata = base_metadata("pulses", seed);
  out.record.metadata.emplace_back("units", "slice,mV");
  return out;
}

double bump_eval(double x, const Bump& bump) {
  const double z = (x - bump.center) / bump.width;
  return bump.height * std::exp(-0.5 * z * z);
}

SyntheticData generate_bumps(const Eigen::VectorXd& x, const std::vector<Bump>& bumps,
                             double noise_sd, std::uint64_t seed) {
  require(x.size() >= 2, "need at least two sites");
  require(noise_sd >= 0.0, "noise sd must be non-negative");
  for (const auto& b : bumps) require(b.width > 0.0, "bump widths must be positive");
  Rng rng(seed);
  SyntheticData out;
  out.truth.columns = {"center", "height", "width"};
  for (const auto& b : bumps) out.truth.rows.push_back({b.center, b.height, b.width});
  out.record.x = x;
  out.record.y.resize(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double v = 0.0;
    for (const auto& b : bumps) v += bump_eval(x[i], b);
    out.record.y[i] = v + rng.normal(0.0, noise_sd);
  }
  out.record.metadata = base_metadata("bumps", seed);
  return out;
}

SyntheticData generate_spectrum(const SpectrumOptions& o, std::uint64_t seed) {
  require(o.samples >= 10 && o.upper > o.lower, "invalid spectrum grid");
  require(o.peaks >= 0, "peak count must be non-negative");
  require(o.min_width > 0.0 && o.max_width >= o.min_width, "invalid width range");
  require(o.max_height >= o.min_height, "invalid height range");
  Rng rng(seed);
  const double lo = o.early.center + 0.1;
  const double hi = o.upper - 0.05;
  require(hi > lo || o.peaks == 0, "spectrum range leaves no room for peaks");
  const auto centers = spaced_uniform(rng, o.peaks, lo, hi, o.min_separation);
  std::vector<Bump> bumps{o.early};
  for (double c : centers) {
    const double height = rng.uniform(o.min_height, o.max_height);
    const double width = rng.uniform(o.min_width, o.max_width);
    bumps.push_back({c, height, width});
  }
  auto out = generate_bumps(Eigen::VectorXd::LinSpaced(o.samples, o.lower, o.upper), bumps,
                            o.noise_sd, rng.uniform_int(0, 1L << 40));
  out.record.metadata = base_metadata("spectrum", seed);
  out.record.metadata.emplace_back("units", "Vs/cm2,V");
  return out;
}

}  // namespace peakforge::cli
