#include "peakforge/piecewise.hpp"

#include <cmath>

#include "peakforge/error.hpp"

namespace peakforge {

using detail::require;

namespace {

void check_series(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  require(x.size() > 0, "series is empty");
  require(x.size() == y.size(), "x and y must have equal length");
  require(x.allFinite() && y.allFinite(), "series must be finite");
  for (Eigen::Index i = 1; i < x.size(); ++i) {
    require(x[i] > x[i - 1], "x must be strictly increasing");
  }
}

PenaltySpec make_penalty(PenaltyKind kind, int d) {
  switch (kind) {
    case PenaltyKind::ridge:
      return PenaltySpec::ridge(d);
    case PenaltyKind::second_order_difference:
      return PenaltySpec::second_order_difference(d);
    default:
      throw ValidationError("piecewise fits support ridge and second-order difference penalties");
  }
}

}  // namespace

std::vector<Segment> segment_by_threshold(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                          double threshold, int min_length) {
  check_series(x, y);
  require(std::isfinite(threshold), "threshold must be finite");
  const int n = static_cast<int>(y.size());

  std::vector<IndexRange> runs;
  for (int i = 0; i < n;) {
    if (y[i] < threshold) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 < n && y[j + 1] >= threshold) ++j;
    runs.push_back({i, j});
    i = j + 1;
  }

  std::vector<Segment> out;
  int claimed = -1;  // last index owned by an earlier widened run
  for (const auto& run : runs) {
    IndexRange widened{std::max(run.first - 1, claimed + 1), std::min(run.last + 1, n - 1)};
    claimed = widened.last;
    if (widened.size() < min_length) continue;
    Segment segment;
    segment.indices = widened;
    segment.x_lo = x[widened.first];
    segment.x_hi = x[widened.last];
    out.push_back(std::move(segment));
  }
  return out;
}

std::vector<Segment> fit_piecewise(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                   std::vector<Segment> segments, const PieceConfig& config,
                                   int threads) {
  check_series(x, y);
  for (auto& segment : segments) {
    segment.fit.reset();
    segment.error.clear();
    const auto& r = segment.indices;
    try {
      require(!r.empty() && r.first >= 0 && r.last < x.size(), "segment index range is invalid");
      const int d = config.q + config.k + 1;
      require(r.size() >= d, "segment has fewer observations than basis functions");
      const auto basis = build_basis(x[r.first], x[r.last], config.q, config.k);
      const Eigen::VectorXd xs = x.segment(r.first, r.size());
      const Eigen::VectorXd ys = y.segment(r.first, r.size());
      segment.fit = fit_unimodal(basis, xs, ys, make_penalty(config.penalty, d), config.sigma2,
                                 config.lambda, threads);
      segment.x_lo = xs[0];
      segment.x_hi = xs[xs.size() - 1];
    } catch (const std::exception& e) {
      segment.error = e.what();
    }
  }
  return segments;
}

Eigen::VectorXd evaluate_piecewise(const std::vector<Segment>& segments, const Eigen::VectorXd& x) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.size());
  for (const auto& segment : segments) {
    if (!segment.fit) continue;
    const auto& basis = segment.fit->spline.basis();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (basis.contains(x[i])) out[i] += segment.fit->spline(x[i]);
    }
  }
  return out;
}

PhaseLabels classify_phases(const Segment& segment, const Eigen::VectorXd& x) {
  require(segment.fit.has_value(), "segment has no fit");
  const auto& r = segment.indices;
  require(!r.empty() && r.last < x.size(), "segment index range is invalid");
  PhaseLabels out;
  const auto& spline = segment.fit->spline;
  if (spline.basis().degree() < 1) return out;
  out.turning_point = turning_point(spline);
  if (!out.turning_point) return out;
  const double t = *out.turning_point;
  if (t <= spline.basis().lower()) {
    out.ascent = r;
    return out;
  }
  int split = r.first;
  while (split <= r.last && x[split] <= t) ++split;
  out.descent = {r.first, split - 1};
  out.ascent = {split, r.last};
  return out;
}

}  // namespace peakforge
