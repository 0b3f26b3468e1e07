#include <doctest.h>

#include <cmath>

#include "oracles/algorithm1.hpp"
#include "peakforge/cli/synthetic.hpp"
#include "peakforge/error.hpp"
#include "peakforge/random.hpp"
#include "peakforge/varying_deconv.hpp"

using namespace peakforge;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd out(values.size());
  int i = 0;
  for (double v : values) out[i++] = v;
  return out;
}

cli::SyntheticData two_bumps(int n, double noise, std::uint64_t seed) {
  const auto x = Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);
  return cli::generate_bumps(x, {{0.35, 1.0, 0.03}, {0.65, 0.6, 0.08}}, noise, seed);
}

VaryingOptions small_options(double noise) {
  VaryingOptions options;
  options.q = 20;
  options.kappa = 0.002;
  options.sigma2 = noise * noise;
  return options;
}

}  // namespace

TEST_CASE("unit_scale") {
  CHECK(unit_scale(vec({2, 4})) == vec({0, 1}));
  CHECK(unit_scale(vec({3, 3})) == vec({1, 1}));
  CHECK(unit_scale(vec({0, 5, 10})) == vec({0, 0.5, 1}));
  CHECK(unit_scale(vec({-2, -2})) == vec({1, 1}));
  CHECK_THROWS_AS(unit_scale(vec({0, 0, 0})), ValidationError);
  CHECK_THROWS_AS(unit_scale(Eigen::VectorXd()), ValidationError);
}

TEST_CASE("noise window estimate") {
  Rng rng(21);
  int covered = 0;
  for (int rep = 0; rep < 200; ++rep) {
    Eigen::VectorXd y(700);
    for (auto& v : y) v = rng.normal(0.0, 2.0);
    const double s2 = estimate_noise_from_window(y, 35, 699);
    covered += s2 >= 3.2 && s2 <= 4.8;
  }
  CHECK(covered >= 190);

  const Eigen::VectorXd flat = Eigen::VectorXd::Constant(100, 3.0);
  CHECK_THROWS_AS(estimate_noise_from_window(flat, 0, 99), NumericalError);
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(100, 0.0, 1.0);
  CHECK_THROWS_AS(estimate_noise_from_window(y, 0, 20), ValidationError);
  CHECK_THROWS_AS(estimate_noise_from_window(y, 50, 100), ValidationError);
  CHECK_THROWS_AS(estimate_noise_from_window(y, -1, 40), ValidationError);
  CHECK(estimate_noise_from_window(y, 0, 29) > 0.0);
}

TEST_CASE("varying_l0_fit invariants") {
  const auto data = two_bumps(200, 0.01, 4);
  const auto options = small_options(0.01);
  const auto fit = varying_l0_fit(data.record.x, data.record.y, options);
  const int d = options.q + options.k + 1;
  REQUIRE(fit.G.cols() == d);
  CHECK(fit.iterations >= 1);
  CHECK(fit.iterations <= options.max_outer);
  CHECK(fit.G.minCoeff() >= 0.0);
  CHECK(fit.G.maxCoeff() <= 1.0);
  for (int j = 0; j < d; ++j) {
    CHECK(in_unimodal_cone(fit.coefficients.col(j), j));
    if (fit.column_range[j] > 0.0) {
      CHECK(fit.G.col(j).minCoeff() == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(fit.G.col(j).maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK((fit.fitted - fit.G * fit.a).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((fit.fitted_raw.array() - (fit.fitted.array() * fit.y_range + fit.y_min)).abs().maxCoeff() < 1e-12);
  for (int j = 0; j < d; ++j) {
    CHECK((fit.a[j] == 0.0 || fit.a[j] >= 1e-4));
  }
  REQUIRE_FALSE(fit.peaks.empty());
  for (const auto& peak : fit.peaks) {
    CHECK(peak.height == fit.a[peak.column]);
    CHECK(peak.location >= 0.0);
    CHECK(peak.location <= 1.0);
  }
  // The dominant peak lies on the taller bump.
  auto top = fit.peaks.front();
  for (const auto& peak : fit.peaks)
    if (peak.height_raw > top.height_raw) top = peak;
  CHECK(std::abs(top.location - 0.35) < 0.03);

  auto threaded = options;
  threaded.threads = 3;
  const auto again = varying_l0_fit(data.record.x, data.record.y, threaded);
  CHECK(again.a == fit.a);
}

TEST_CASE("varying_l0_fit matches the literal transcription") {
  const auto data = two_bumps(150, 0.01, 11);
  const auto options = small_options(0.01);
  const auto fit = varying_l0_fit(data.record.x, data.record.y, options);
  const auto reference =
      oracle::algorithm1(data.record.x, data.record.y, options.q, options.k, options.kappa, options.sigma2);
  CHECK(fit.iterations == reference.iterations);
  CHECK((fit.a - reference.a).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("varying_l0_fit errors") {
  const auto data = two_bumps(100, 0.01, 2);
  auto options = small_options(0.01);
  const auto& x = data.record.x;
  const auto& y = data.record.y;
  CHECK_THROWS_AS(varying_l0_fit(x, Eigen::VectorXd::Zero(100), options), ValidationError);
  CHECK_THROWS_AS(varying_l0_fit(x.head(50), y, options), ValidationError);
  Eigen::VectorXd unordered = x;
  std::swap(unordered[3], unordered[4]);
  CHECK_THROWS_AS(varying_l0_fit(unordered, y, options), ValidationError);
  options.kappa = 0.0;
  CHECK_THROWS_AS(varying_l0_fit(x, y, options), ValidationError);
  options = small_options(0.01);
  options.sigma2 = -1.0;
  CHECK_THROWS_AS(varying_l0_fit(x, y, options), ValidationError);
}
