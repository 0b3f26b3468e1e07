#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "peakforge/unimodal_regression.hpp"

namespace peakforge {

/// Inclusive 0-based index range; empty when last < first.
struct IndexRange {
  int first = 0;
  int last = -1;

  bool empty() const { return last < first; }
  int size() const { return empty() ? 0 : last - first + 1; }
};

struct Segment {
  IndexRange indices;
  double x_lo = 0.0;
  double x_hi = 0.0;
  std::optional<UnimodalFit> fit;
  std::string error;  // set when the piece could not be fitted
};

/// Maximal runs with y >= threshold, each widened by one observation per side
/// when available. A point claimed by two neighbouring runs stays with the
/// earlier one. Runs (after widening) shorter than min_length are dropped.
std::vector<Segment> segment_by_threshold(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                          double threshold, int min_length = 1);

struct PieceConfig {
  int q = 25;
  int k = 3;
  PenaltyKind penalty = PenaltyKind::second_order_difference;
  Sigma2Policy sigma2 = IteratedSigma2{};
  LambdaPolicy lambda = reml_default();
};

/// Fits every segment independently on a basis spanning its own x-range.
/// Failures are recorded in Segment::error; the other pieces still get fitted.
std::vector<Segment> fit_piecewise(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                   std::vector<Segment> segments, const PieceConfig& config,
                                   int threads = 1);

/// Sum of the piece fits; zero outside every fitted segment.
Eigen::VectorXd evaluate_piecewise(const std::vector<Segment>& segments, const Eigen::VectorXd& x);

struct PhaseLabels {
  std::optional<double> turning_point;  // empty for a flat fit
  IndexRange descent;                   // x <= turning point
  IndexRange ascent;                    // x > turning point
};

/// Splits a fitted segment at the zero of its derivative. A rising fit is all
/// descent, a falling fit all ascent, a flat fit has no phases.
PhaseLabels classify_phases(const Segment& segment, const Eigen::VectorXd& x);

}  // namespace peakforge
