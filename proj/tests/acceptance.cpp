// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/algorithm1.hpp"
#include "oracles/cox_de_boor.hpp"
#include "oracles/projected_gradient.hpp"
#include "peakforge/additive_backfit.hpp"
#include "peakforge/cli/synthetic.hpp"
#include "peakforge/l0_deconv.hpp"
#include "peakforge/piecewise.hpp"
#include "peakforge/random.hpp"
#include "peakforge/unimodal_regression.hpp"
#include "peakforge/varying_deconv.hpp"

using namespace peakforge;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const WaveParams fact{17.41, 4.745, 31.81};

// 1. Partition of unity and local support.
Outcome basis_properties() {
  Rng rng(1);
  double worst_sum = 0.0, worst_oracle = 0.0;
  int support_violations = 0;
  for (int q = 0; q <= 50; ++q) {
    for (int k = 1; k <= 3; ++k) {
      const double a = -1.0, b = 2.0;
      const auto basis = build_basis(a, b, q, k);
      const auto& t = basis.knots();
      for (int s = 0; s < 1000; ++s) {
        const double x = s == 0 ? a : s == 1 ? b : rng.uniform(a, b);
        const auto values = basis.eval(x);
        worst_sum = std::max(worst_sum, std::abs(values.sum() - 1.0));
        int nonzero = 0;
        for (int j = 0; j < basis.dimension(); ++j) {
          if (values[j] == 0.0) continue;
          ++nonzero;
          // N_j lives on [t_j, t_{j+k+1}].
          if (x < t[j] || x > t[j + k + 1]) ++support_violations;
        }
        if (nonzero > k + 1) ++support_violations;
        if (s % 10 == 0) {
          const auto expected = oracle::basis_values(a, b, q, k, x);
          for (int j = 0; j < basis.dimension(); ++j)
            worst_oracle = std::max(worst_oracle, std::abs(values[j] - expected[j]));
        }
      }
    }
  }
  std::ostringstream out;
  out << "max |sum-1| " << worst_sum << ", max |N - recursion| " << worst_oracle
      << ", support violations " << support_violations;
  return {worst_sum <= 1e-10 && worst_oracle <= 1e-10 && support_violations == 0, out.str()};
}

// Exact minimizer over one mode's cone by trying every active set of the
// increments beta = C z (z_0 free, z_i >= 0).
double cone_minimum_by_active_sets(const Eigen::MatrixXd& B, const Eigen::VectorXd& y,
                                   const Eigen::MatrixXd& omega, double lambda, double sigma2,
                                   int mode, Eigen::VectorXd& best_beta) {
  const int d = static_cast<int>(B.cols());
  const Eigen::MatrixXd C = oracle::increment_map(d, mode);
  const Eigen::MatrixXd H = C.transpose() * (B.transpose() * B / sigma2 + lambda * omega) * C;
  const Eigen::VectorXd g = C.transpose() * B.transpose() * y / sigma2;
  auto objective = [&](const Eigen::VectorXd& beta) {
    return (y - B * beta).squaredNorm() / sigma2 + lambda * beta.dot(omega * beta);
  };
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << (d - 1)); ++mask) {
    std::vector<int> free{0};
    for (int i = 1; i < d; ++i)
      if (mask & (1u << (i - 1))) free.push_back(i);
    const int m = static_cast<int>(free.size());
    Eigen::MatrixXd Hs(m, m);
    Eigen::VectorXd gs(m);
    for (int r = 0; r < m; ++r) {
      gs[r] = g[free[r]];
      for (int c = 0; c < m; ++c) Hs(r, c) = H(free[r], free[c]);
    }
    const Eigen::VectorXd zs = Hs.ldlt().solve(gs);
    bool feasible = true;
    for (int r = 1; r < m; ++r) feasible &= zs[r] >= -1e-12;
    if (!feasible) continue;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
    for (int r = 0; r < m; ++r) z[free[r]] = zs[r];
    const Eigen::VectorXd beta = C * z;
    const double value = objective(beta);
    if (value < best) {
      best = value;
      best_beta = beta;
    }
  }
  return best;
}

// 2. Mode search against exhaustive enumeration.
Outcome mode_search() {
  int matches = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(1000 + seed);
    Eigen::VectorXd x(60), y(60);
    for (auto& v : x) v = rng.uniform();
    std::sort(x.data(), x.data() + x.size());
    const double centre = rng.uniform(0.1, 0.9), width = rng.uniform(0.08, 0.3);
    for (int i = 0; i < 60; ++i)
      y[i] = 2.0 * std::exp(-0.5 * std::pow((x[i] - centre) / width, 2)) + rng.normal(0.0, 0.3);
    const auto basis = build_basis(0.0, 1.0, 8, 3);
    const auto penalty = PenaltySpec::second_order_difference(basis.dimension());
    const auto fit = fit_unimodal(basis, x, y, penalty, 0.09);

    const Eigen::MatrixXd B = basis.design_matrix(x);
    std::vector<double> rss(basis.dimension());
    for (int m = 0; m < basis.dimension(); ++m) {
      Eigen::VectorXd beta;
      cone_minimum_by_active_sets(B, y, penalty.omega(), fit.lambda, 0.09, m, beta);
      rss[m] = (y - B * beta).squaredNorm();
    }
    const double smallest = *std::min_element(rss.begin(), rss.end());
    int mode = 0;
    while (rss[mode] > smallest * (1.0 + 1e-9) + 1e-14 * y.squaredNorm()) ++mode;
    const double gap = std::abs(fit.rss - rss[mode]) / rss[mode];
    worst = std::max(worst, gap);
    matches += mode == fit.mode && gap <= 1e-8;
  }
  std::ostringstream out;
  out << matches << "/50 mode and RSS matches, max relative RSS gap " << worst;
  return {matches == 50, out.str()};
}

// 3. Fixed-mode QP against multi-start projected gradient.
Outcome constrained_qp() {
  double worst = 0.0;
  Rng rng(3);
  for (int instance = 0; instance < 20; ++instance) {
    const auto basis = build_basis(0.0, 1.0, 1, 2);  // d = 4
    Eigen::VectorXd x(8), y(8);
    for (auto& v : x) v = rng.uniform();
    for (auto& v : y) v = rng.normal(0.0, 2.0);
    const auto design = basis.design_matrix(x);
    UnimodalSolver solver(design, PenaltySpec::ridge(4), 1.0);
    oracle::ConeObjective objective{design, y, Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4),
                                    0.0, 1.0};
    for (int m = 0; m < 4; ++m) {
      const auto beta = solver.fit_fixed_mode(y, m, 0.0);
      const double reference =
          oracle::projected_gradient_minimum(objective, m, 100, 4000, 100 * instance + m);
      worst = std::max(worst, std::abs(objective(beta) - reference));
      if (!in_unimodal_cone(beta, m)) worst = std::numeric_limits<double>::infinity();
    }
  }
  std::ostringstream out;
  out << "max |objective - oracle| " << worst << " over 20 instances x 4 modes";
  return {worst <= 1e-4, out.str()};
}

// 4. Wave maximum location.
Outcome wave_stationarity() {
  const double t_star = fact.xi1 * std::log((fact.xi1 + fact.xi2) / fact.xi1);
  double best_t = 0.0, best_value = -1.0;
  for (long i = 0; i <= 2'000'000; ++i) {
    const double t = i * 1e-4;
    const double value = wave_eval(t, fact);
    if (value > best_value) {
      best_value = value;
      best_t = t;
    }
  }
  const double factor_gap = std::abs(fact.U0 * wave_peak_factor(fact.xi1, fact.xi2) - best_value);
  std::ostringstream out;
  out << "grid argmax " << best_t << ", t* " << t_star << ", peak factor gap " << factor_gap;
  return {std::abs(best_t - t_star) <= 1e-3 && factor_gap <= 1e-6, out.str()};
}

// 5. Parametric blind deconvolution of five accumulated waves.
Outcome blind_pulses() {
  int successes = 0;
  std::ostringstream failures;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    cli::PulseOptions options;
    options.pulses = 5;
    options.noise_fraction = 0.02;
    const auto data = cli::generate_pulses(options, seed);
    Rng rng(500 + seed);
    auto perturb = [&](double v) { return v * (rng.uniform() < 0.5 ? 0.8 : 1.2); };
    const ParametricShape start{{perturb(fact.U0), perturb(fact.xi1), perturb(fact.xi2)}, 151};
    const auto result = blind_deconv(data.record.y, start);
    const auto& shape = std::get<ParametricShape>(result.shape);
    bool ok = result.pulses.nonzero_count == 5;
    ok &= std::abs(shape.params.xi1 / fact.xi1 - 1.0) <= 0.1;
    ok &= std::abs(shape.params.xi2 / fact.xi2 - 1.0) <= 0.1;
    if (ok) {
      const auto amplitudes = wave_amplitudes(result.pulses, shape);
      int p = 0;
      for (Eigen::Index c = 0; c < amplitudes.size(); ++c) {
        if (amplitudes[c] == 0.0) continue;
        const auto& truth = data.truth.rows[p++];
        ok &= std::abs(pulse_time(static_cast<int>(c), 151) - truth[0]) <= 1;
        ok &= std::abs(amplitudes[c] / truth[1] / fact.U0 - 1.0) <= 0.1;
      }
    }
    if (ok) {
      ++successes;
    } else {
      failures << " seed " << seed << " (count " << result.pulses.nonzero_count << ", xi1 "
               << shape.params.xi1 << ", xi2 " << shape.params.xi2 << ")";
    }
  }
  std::ostringstream out;
  out << successes << "/20 seeds recovered" << failures.str();
  return {successes >= 18, out.str()};
}

cli::SyntheticData frozen_two_bumps(int n, std::uint64_t seed) {
  const auto x = Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);
  return cli::generate_bumps(x, {{0.35, 1.0, 0.03}, {0.65, 0.6, 0.08}}, 0.01, seed);
}

// 6. Varying-shape fit against the literal transcription.
Outcome transcription() {
  const auto data = frozen_two_bumps(300, 5);
  VaryingOptions options;
  options.q = 40;
  options.kappa = 0.002;
  options.sigma2 = 1e-4;
  const auto fit = varying_l0_fit(data.record.x, data.record.y, options);
  const auto reference = oracle::algorithm1(data.record.x, data.record.y, options.q, options.k,
                                            options.kappa, options.sigma2);
  const double gap = (fit.a - reference.a).cwiseAbs().maxCoeff();
  std::ostringstream out;
  out << "max |a - a_oracle| " << gap << ", iterations " << fit.iterations << " vs "
      << reference.iterations << ", active " << fit.active_set.size();
  return {gap <= 1e-10 && fit.iterations == reference.iterations, out.str()};
}

// 7. Two overlapping bumps of different widths.
Outcome overlapping_bumps() {
  const cli::Bump narrow{0.45, 1.0, 0.01};
  const double separation = 1.5 * 2.0 * std::sqrt(2.0 * std::log(2.0)) * narrow.width;
  const cli::Bump broad{narrow.center + separation, 0.6, 0.03};
  const auto x = Eigen::VectorXd::LinSpaced(600, 0.0, 1.0);
  int successes = 0, ratio_ok = 0;
  std::ostringstream tally;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto data = cli::generate_bumps(x, {narrow, broad}, 0.01, seed);
    const auto& y = data.record.y;
    VaryingOptions options;
    options.q = 200;
    options.kappa = 0.002;
    options.sigma2 = 1e-4;
    const auto fit = varying_l0_fit(x, y, options);

    bool ok = fit.active_set.size() == 2;
    if (ok) {
      const cli::Bump* truth[2] = {&narrow, &broad};
      for (int p = 0; p < 2; ++p) {
        const int j = fit.peaks[p].column;
        ok &= std::abs(fit.peaks[p].height_raw / truth[p]->height - 1.0) <= 0.1;
        double sq = 0.0;
        for (int i = 0; i < x.size(); ++i) {
          const double r = fit.a[j] * fit.G(i, j) - cli::bump_eval(x[i], *truth[p]) / fit.y_range;
          sq += r * r;
        }
        ok &= std::sqrt(sq / x.size()) <= 0.05;
      }
    }
    successes += ok;

    PieceConfig piece;
    piece.sigma2 = FixedSigma2{1e-4};
    auto segments = fit_piecewise(x, y, segment_by_threshold(x, y, 0.05, 5), piece);
    const double rss_piece = (y - evaluate_piecewise(segments, x)).squaredNorm();
    const double rss_varying = (y - fit.fitted_raw).squaredNorm();
    ratio_ok += rss_piece / rss_varying > 1.1;
    tally << " [" << seed << ": active " << fit.active_set.size() << ", ratio " << rss_piece / rss_varying
          << "]";
  }
  std::ostringstream out;
  out << successes << "/20 seeds with two peaks recovered, " << ratio_ok << "/20 with RSS ratio > 1.1;"
      << tally.str();
  return {successes >= 18 && ratio_ok == 20, out.str()};
}

// 8. Derivative sign pattern and single zero crossing.
Outcome derivative_uniqueness() {
  std::vector<double> lambdas;
  for (int i = 0; i < 10; ++i) lambdas.push_back(std::pow(10.0, -4.0 + i * 8.0 / 9.0));
  int fits = 0, violations = 0;
  for (std::uint64_t seed = 1; fits < 50 * 10; ++seed) {
    const auto data = cli::generate_dive({}, seed);
    const auto& x = data.record.x;
    const auto& y = data.record.y;
    auto segments = segment_by_threshold(x, y, 2.0, 20);
    for (const auto& segment : segments) {
      if (fits >= 50 * 10) break;
      for (double lambda : lambdas) {
        PieceConfig config;
        config.lambda = FixedLambda{lambda};
        const auto fitted = fit_piecewise(x, y, {segment}, config);
        if (!fitted[0].fit) {
          ++violations;
          ++fits;
          continue;
        }
        const auto slope = fitted[0].fit->spline.derivative();
        const auto& c = slope.coefficients();
        const double scale = c.cwiseAbs().maxCoeff();
        const double tol = 1e-9 * std::max(scale, 1.0);
        bool falling = false, pattern = true;
        for (int i = 0; i < c.size(); ++i) {
          if (c[i] < -tol) falling = true;
          if (falling && c[i] > tol) pattern = false;
        }
        // Sign changes on a fine grid, each refined by bisection.
        const double lo = segment.x_lo, hi = segment.x_hi;
        int crossings = 0;
        double prev_x = lo, prev = slope.eval(lo);
        for (int i = 1; i <= 4000; ++i) {
          const double xi = lo + (hi - lo) * i / 4000.0;
          const double v = slope.eval(xi);
          if (std::abs(v) <= tol) continue;
          if (std::abs(prev) > tol && (v > 0) != (prev > 0)) {
            double a = prev_x, b = xi;
            for (int it = 0; it < 60; ++it) {
              const double mid = 0.5 * (a + b);
              ((slope.eval(mid) > 0) == (prev > 0) ? a : b) = mid;
            }
            ++crossings;
          }
          prev = v;
          prev_x = xi;
        }
        violations += !pattern || crossings > 1;
        ++fits;
      }
    }
  }
  std::ostringstream out;
  out << fits / 10 << " segments x 10 lambdas, " << violations << " violations";
  return {violations == 0, out.str()};
}

// 9. Backfitting monotonicity and AIC selection.
Outcome backfitting() {
  const auto x = Eigen::VectorXd::LinSpaced(120, 0.0, 1.0);
  AdditiveConfig config;
  config.sigma2 = 0.05 * 0.05;
  int monotone = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto data = cli::generate_bumps(x, {{0.3, 1.0, 0.06}, {0.7, 0.8, 0.1}}, 0.05, seed);
    const auto fit = backfit(x, data.record.y, 2 + static_cast<int>(seed % 2), config);
    bool ok = true;
    for (std::size_t i = 1; i < fit.rss_history.size(); ++i)
      ok &= fit.rss_history[i] <= fit.rss_history[i - 1] + 1e-10;
    monotone += ok;
  }
  int single = 0, pair = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto one = cli::generate_bumps(x, {{0.5, 1.0, 0.08}}, 0.05, 10'000 + seed);
    single += select_L_by_aic(x, one.record.y, 3, config).best.L == 1;
    const auto two = cli::generate_bumps(x, {{0.3, 1.0, 0.06}, {0.7, 0.8, 0.08}}, 0.05, 20'000 + seed);
    pair += select_L_by_aic(x, two.record.y, 3, config).best.L == 2;
  }
  std::ostringstream out;
  out << monotone << "/50 monotone runs, AIC picks L=1 in " << single << "/100 and L=2 in " << pair << "/100";
  return {monotone == 50 && single >= 90 && pair >= 90, out.str()};
}

// 10. Fewer pulses for larger kappa.
Outcome kappa_direction() {
  cli::PulseOptions options;
  options.pulses = 3;
  options.samples = 250;
  options.min_spacing = 30;
  const auto data = cli::generate_pulses(options, 42);
  const auto G = build_conv_matrix(ParametricShape{fact, 151}, static_cast<int>(data.record.y.size()));
  std::vector<int> counts;
  for (double kappa : {1.0, 1e-2, 1e-4}) counts.push_back(l0_fit_pulses(G, data.record.y, kappa).nonzero_count);
  std::ostringstream out;
  out << "peak counts at kappa 1, 1e-2, 1e-4: " << counts[0] << ", " << counts[1] << ", " << counts[2];
  return {counts[0] <= counts[1] && counts[1] <= counts[2], out.str()};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"basis partition of unity and local support", 10, basis_properties},
      {"mode search equals exhaustive enumeration", 60, mode_search},
      {"constrained QP equals projected-gradient oracle", 30, constrained_qp},
      {"wave maximum location", 1, wave_stationarity},
      {"parametric blind deconvolution of five waves", 300, blind_pulses},
      {"varying-shape fit equals literal transcription", 120, transcription},
      {"two overlapping bumps of different widths", 600, overlapping_bumps},
      {"derivative sign pattern across lambda", 60, derivative_uniqueness},
      {"backfitting monotonicity and AIC selection", 600, backfitting},
      {"kappa sparsity direction", 60, kappa_direction},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = outcome.pass && seconds <= criteria[i].budget_s;
    failed += !pass;
    std::printf("%s criterion %zu: %s (%.2f s, budget %.0f s) %s\n", pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name, seconds, criteria[i].budget_s, outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
