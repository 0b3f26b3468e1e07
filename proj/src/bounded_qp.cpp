#include "peakforge/bounded_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "peakforge/error.hpp"

namespace peakforge::qp {

namespace {

// Upper-triangular R with R'R = Q[P, P] for an ordered passive set P.
class PassiveFactor {
 public:
  explicit PassiveFactor(const Eigen::MatrixXd& Q) : Q_(Q), R_(Q.rows(), Q.rows()) {}

  const std::vector<int>& members() const { return members_; }
  int size() const { return static_cast<int>(members_.size()); }

  bool contains(int index) const {
    return std::find(members_.begin(), members_.end(), index) != members_.end();
  }

  // False when the column is numerically dependent on the current members.
  bool append(int index) {
    const int p = size();
    Eigen::VectorXd column(p);
    for (int i = 0; i < p; ++i) column[i] = Q_(members_[i], index);
    if (p > 0) {
      R_.topLeftCorner(p, p).triangularView<Eigen::Upper>().transpose().solveInPlace(column);
    }
    const double diag = Q_(index, index);
    const double pivot = diag - column.squaredNorm();
    if (!(diag > 0.0) || pivot <= 1e-12 * diag) return false;
    R_.block(0, p, p, 1) = column;
    R_.block(p, 0, 1, p).setZero();
    R_(p, p) = std::sqrt(pivot);
    members_.push_back(index);
    return true;
  }

  void remove_at(int position) {
    const int p = size();
    // Shift columns left, then restore triangularity with Givens rotations.
    for (int c = position; c < p - 1; ++c) R_.col(c).head(p) = R_.col(c + 1).head(p);
    for (int c = position; c < p - 1; ++c) {
      Eigen::JacobiRotation<double> rotation;
      rotation.makeGivens(R_(c, c), R_(c + 1, c));
      R_.block(0, c, p, p - 1 - c).applyOnTheLeft(c, c + 1, rotation.adjoint());
      R_(c + 1, c) = 0.0;
    }
    members_.erase(members_.begin() + position);
  }

  // Solves Q[P, P] s = rhs[P].
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    const int p = size();
    Eigen::VectorXd s(p);
    for (int i = 0; i < p; ++i) s[i] = rhs[members_[i]];
    const auto upper = R_.topLeftCorner(p, p).triangularView<Eigen::Upper>();
    s = upper.transpose().solve(s);
    return upper.solve(s);
  }

 private:
  const Eigen::MatrixXd& Q_;
  Eigen::MatrixXd R_;
  std::vector<int> members_;
};

}  // namespace

BoundedQpResult solve_bounded_qp(const Eigen::MatrixXd& Q, const Eigen::VectorXd& r,
                                 const std::vector<bool>& nonnegative, int max_iterations) {
  const int n = static_cast<int>(Q.rows());
  detail::require(Q.cols() == n && r.size() == n &&
                      static_cast<int>(nonnegative.size()) == n,
                  "bounded QP dimension mismatch");
  if (max_iterations <= 0) max_iterations = 30 * n + 100;

  PassiveFactor passive(Q);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> blocked(n, false);

  for (int i = 0; i < n; ++i) {
    if (!nonnegative[i] && !passive.append(i)) {
      throw NumericalError("bounded QP: objective is not strictly convex in the free variables");
    }
  }

  const double scale = r.lpNorm<Eigen::Infinity>() + Q.lpNorm<Eigen::Infinity>();
  const double tolerance = 1e-12 * std::max(scale, std::numeric_limits<double>::min());

  auto scatter = [&](const Eigen::VectorXd& s) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < passive.size(); ++i) full[passive.members()[i]] = s[i];
    return full;
  };

  if (passive.size() > 0) x = scatter(passive.solve(r));

  int iterations = 0;
  while (true) {
    const Eigen::VectorXd descent = r - Q * x;
    int entering = -1;
    double best = tolerance;
    for (int i = 0; i < n; ++i) {
      if (nonnegative[i] && !blocked[i] && descent[i] > best && !passive.contains(i)) {
        best = descent[i];
        entering = i;
      }
    }
    if (entering < 0) break;
    if (!passive.append(entering)) {
      blocked[entering] = true;
      continue;
    }

    bool progressed = true;
    while (true) {
      if (++iterations > max_iterations) {
        throw NumericalError("bounded QP: iteration cap exceeded (ill-posed input?)");
      }
      const Eigen::VectorXd trial = scatter(passive.solve(r));
      if (trial[entering] <= 0.0 && passive.contains(entering) && x[entering] == 0.0) {
        // Roundoff made the entering direction useless; drop it for good.
        const auto& m = passive.members();
        passive.remove_at(static_cast<int>(std::find(m.begin(), m.end(), entering) - m.begin()));
        blocked[entering] = true;
        progressed = false;
        break;
      }

      double step = 1.0;
      int blocking = -1;
      for (int idx : passive.members()) {
        if (nonnegative[idx] && trial[idx] <= 0.0) {
          const double candidate = x[idx] / (x[idx] - trial[idx]);
          if (candidate < step) {
            step = candidate;
            blocking = idx;
          }
        }
      }
      if (blocking < 0) {
        x = trial;
        break;
      }
      x += step * (trial - x);
      x[blocking] = 0.0;
      for (int pos = passive.size() - 1; pos >= 0; --pos) {
        const int idx = passive.members()[pos];
        if (nonnegative[idx] && x[idx] <= 0.0) {
          x[idx] = 0.0;
          passive.remove_at(pos);
        }
      }
    }
    if (progressed) std::fill(blocked.begin(), blocked.end(), false);
  }

  for (int i = 0; i < n; ++i) {
    if (nonnegative[i] && x[i] < 0.0) x[i] = 0.0;
  }
  return {x, iterations};
}

}  // namespace peakforge::qp
