#include <doctest.h>

#include <cmath>

#include "peakforge/cli/synthetic.hpp"
#include "peakforge/error.hpp"
#include "peakforge/piecewise.hpp"
#include "peakforge/random.hpp"

using namespace peakforge;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd out(values.size());
  int i = 0;
  for (double v : values) out[i++] = v;
  return out;
}

Eigen::VectorXd index_grid(Eigen::Index n) { return Eigen::VectorXd::LinSpaced(n, 0.0, n - 1.0); }

PieceConfig small_config() {
  PieceConfig config;
  config.q = 8;
  return config;
}

}  // namespace

TEST_CASE("segment_by_threshold on the small example") {
  const auto y = vec({0, 0, 5, 6, 5, 0, 0, 4, 7, 0});
  const auto segments = segment_by_threshold(index_grid(10), y, 3.0);
  REQUIRE(segments.size() == 2);
  CHECK(segments[0].indices.first == 1);
  CHECK(segments[0].indices.last == 5);
  CHECK(segments[1].indices.first == 6);
  CHECK(segments[1].indices.last == 9);
  CHECK(segments[0].x_lo == 1.0);
  CHECK(segments[1].x_hi == 9.0);

  CHECK(segment_by_threshold(index_grid(10), Eigen::VectorXd::Zero(10), 3.0).empty());
  CHECK(segment_by_threshold(index_grid(10), y, 3.0, 5).size() == 1);
}

TEST_CASE("segment_by_threshold edge handling") {
  // Runs touching the ends cannot be widened outward.
  auto segments = segment_by_threshold(index_grid(6), vec({5, 5, 0, 0, 5, 5}), 3.0);
  REQUIRE(segments.size() == 2);
  CHECK(segments[0].indices.first == 0);
  CHECK(segments[0].indices.last == 2);
  CHECK(segments[1].indices.first == 3);
  CHECK(segments[1].indices.last == 5);

  // A single separating point goes to the earlier run.
  segments = segment_by_threshold(index_grid(5), vec({5, 5, 0, 5, 5}), 3.0);
  REQUIRE(segments.size() == 2);
  CHECK(segments[0].indices.last == 2);
  CHECK(segments[1].indices.first == 3);

  CHECK_THROWS_AS(segment_by_threshold(Eigen::VectorXd(), Eigen::VectorXd(), 1.0), ValidationError);
  CHECK_THROWS_AS(segment_by_threshold(vec({0, 2, 1}), vec({0, 0, 0}), 1.0), ValidationError);
  CHECK_THROWS_AS(segment_by_threshold(vec({0, 1}), vec({0}), 1.0), ValidationError);
}

TEST_CASE("segmentation partitions the above-threshold points") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd y(200);
    for (auto& v : y) v = rng.uniform(0.0, 10.0);
    const auto segments = segment_by_threshold(index_grid(200), y, 6.0);
    std::vector<int> owner(200, -1);
    for (std::size_t s = 0; s < segments.size(); ++s) {
      if (s > 0) CHECK(segments[s].indices.first > segments[s - 1].indices.last);
      for (int i = segments[s].indices.first; i <= segments[s].indices.last; ++i) {
        CHECK(owner[i] == -1);
        owner[i] = static_cast<int>(s);
      }
    }
    for (int i = 0; i < 200; ++i) {
      if (y[i] >= 6.0) CHECK(owner[i] >= 0);
    }
  }
}

TEST_CASE("synthetic dives segment into one piece per dive") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = cli::generate_dive({}, seed);
    const auto segments = segment_by_threshold(data.record.x, data.record.y, 3.0, 29);
    REQUIRE(segments.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
      CHECK(segments[k].indices.first >= data.truth.rows[k][0]);
      CHECK(segments[k].indices.last <= data.truth.rows[k][1]);
    }
  }
}

TEST_CASE("fit_piecewise with one segment equals the plain fit") {
  const auto x = Eigen::VectorXd::LinSpaced(80, 0.0, 1.0);
  Eigen::VectorXd y(80);
  for (int i = 0; i < 80; ++i) y[i] = std::exp(-30.0 * std::pow(x[i] - 0.4, 2));
  Segment whole;
  whole.indices = {0, 79};
  const auto fitted = fit_piecewise(x, y, {whole}, small_config());
  REQUIRE(fitted[0].fit.has_value());
  const auto plain = fit_with_sigma_iteration(build_basis(0.0, 1.0, 8, 3), x, y,
                                              PenaltySpec::second_order_difference(12));
  CHECK(fitted[0].fit->spline.coefficients() == plain.spline.coefficients());
  CHECK(fitted[0].fit->mode == plain.mode);
  CHECK(fitted[0].fit->lambda == plain.lambda);
  CHECK(evaluate_piecewise(fitted, x) == plain.spline.eval(x));
}

TEST_CASE("fit_piecewise reports failures per segment") {
  const auto data = cli::generate_dive({}, 3);
  auto segments = segment_by_threshold(data.record.x, data.record.y, 3.0);
  REQUIRE(segments.size() == 5);
  segments[2].indices.last = segments[2].indices.first + 5;  // too short for the basis
  const auto fitted = fit_piecewise(data.record.x, data.record.y, segments, small_config());
  for (std::size_t k = 0; k < fitted.size(); ++k) {
    if (k == 2) {
      CHECK_FALSE(fitted[k].fit.has_value());
      CHECK_FALSE(fitted[k].error.empty());
    } else {
      REQUIRE(fitted[k].fit.has_value());
      CHECK(fitted[k].error.empty());
      CHECK(in_unimodal_cone(fitted[k].fit->spline.coefficients(), fitted[k].fit->mode));
    }
  }
  const auto global = evaluate_piecewise(fitted, data.record.x);
  CHECK(global[0] == 0.0);
  CHECK(global[segments[2].indices.first + 2] == 0.0);

  PieceConfig parametric = small_config();
  parametric.penalty = PenaltyKind::against_parametric;
  const auto refused = fit_piecewise(data.record.x, data.record.y, segments, parametric);
  CHECK_FALSE(refused[0].error.empty());
}

TEST_CASE("classify_phases") {
  const auto x = Eigen::VectorXd::LinSpaced(101, 0.0, 1.0);
  Eigen::VectorXd y(101);
  for (int i = 0; i < 101; ++i) y[i] = 10.0 * std::pow(std::sin(M_PI * x[i]), 1.5);
  Segment piece;
  piece.indices = {0, 100};
  auto fitted = fit_piecewise(x, y, {piece}, small_config());
  auto phases = classify_phases(fitted[0], x);
  REQUIRE(phases.turning_point.has_value());
  CHECK(std::abs(*phases.turning_point - 0.5) < 0.05);
  CHECK(phases.descent.first == 0);
  CHECK(phases.ascent.last == 100);
  CHECK(phases.descent.last + 1 == phases.ascent.first);
  CHECK(x[phases.descent.last] <= *phases.turning_point);
  CHECK(x[phases.ascent.first] > *phases.turning_point);

  const Eigen::VectorXd rising = 3.0 * x + x.array().square().matrix();
  fitted = fit_piecewise(x, rising, {piece}, small_config());
  phases = classify_phases(fitted[0], x);
  CHECK(phases.ascent.empty());
  CHECK(phases.descent.size() == 101);

  const Eigen::VectorXd falling = -rising;
  fitted = fit_piecewise(x, falling, {piece}, small_config());
  phases = classify_phases(fitted[0], x);
  CHECK(phases.descent.empty());
  CHECK(phases.ascent.size() == 101);

  Segment flat = piece;
  flat.fit = fit_unimodal(build_basis(0.0, 1.0, 8, 3), x, Eigen::VectorXd::Constant(101, 2.0),
                          PenaltySpec::second_order_difference(12), 1.0);
  phases = classify_phases(flat, x);
  CHECK_FALSE(phases.turning_point.has_value());
  CHECK(phases.descent.empty());
  CHECK(phases.ascent.empty());

  CHECK_THROWS_AS(classify_phases(piece, x), ValidationError);
}

TEST_CASE("one derivative sign change for every lambda") {
  const auto x = Eigen::VectorXd::LinSpaced(120, 0.0, 1.0);
  Rng rng(5);
  Eigen::VectorXd y(120);
  for (int i = 0; i < 120; ++i) y[i] = 20.0 * x[i] * (1.0 - x[i]) * 4.0 + rng.normal(0.0, 0.3);
  const auto basis = build_basis(0.0, 1.0, 25, 3);
  const auto penalty = PenaltySpec::second_order_difference(basis.dimension());
  for (int g = 0; g < 10; ++g) {
    const double lambda = std::pow(10.0, -4.0 + g);
    const auto fit = fit_unimodal(basis, x, y, penalty, 0.09, FixedLambda{lambda});
    const auto slope = fit.spline.derivative().coefficients();
    for (int j = 0; j < slope.size(); ++j) {
      if (j < fit.mode) CHECK(slope[j] >= -1e-9);
      else CHECK(slope[j] <= 1e-9);
    }
    int changes = 0;
    double previous = 0.0;
    for (int i = 0; i <= 2000; ++i) {
      const double v = fit.spline.derivative()(i / 2000.0);
      if (std::abs(v) < 1e-9) continue;
      if (previous != 0.0 && (v > 0) != (previous > 0)) ++changes;
      previous = v;
    }
    CHECK(changes <= 1);
  }
}
