#pragma once

#include <Eigen/Dense>
#include <vector>

namespace peakforge::qp {

struct BoundedQpResult {
  Eigen::VectorXd solution;
  int iterations = 0;
};

/// Minimizes 1/2 x'Qx - r'x subject to x_i >= 0 wherever nonnegative[i] is
/// set; the remaining coordinates are free. Q must be symmetric positive
/// semidefinite and positive definite on the free coordinates.
///
/// Primal active-set method in the Lawson-Hanson style. The Cholesky factor
/// of the passive block is updated in O(p^2) per added or removed variable.
/// Throws NumericalError when the iteration cap is exceeded.
BoundedQpResult solve_bounded_qp(const Eigen::MatrixXd& Q, const Eigen::VectorXd& r,
                                 const std::vector<bool>& nonnegative, int max_iterations = 0);

}  // namespace peakforge::qp
