#pragma once

#include <Eigen/Dense>
#include <vector>

namespace peakforge {

/// B-spline basis of degree k on [a, b] with q equidistant inner knots.
///
/// The knot sequence is extended by k knots beyond each boundary with the
/// same spacing, so there are d = q + k + 1 basis functions, indexed
/// 0..d-1 here (the conventional labels run from -k to q). The last knot
/// interval is treated as closed so the partition of unity also holds at b.
class BSplineBasis {
 public:
  int degree() const { return degree_; }
  int inner_knots() const { return inner_knots_; }
  int dimension() const { return inner_knots_ + degree_ + 1; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  const std::vector<double>& knots() const { return knots_; }

  bool contains(double x) const { return x >= lower_ && x <= upper_; }

  /// All d basis values at x. At most degree()+1 entries are nonzero.
  Eigen::VectorXd eval(double x) const;

  /// Writes the degree()+1 potentially nonzero values into `values` and
  /// returns the basis index of the first of them.
  int eval_local(double x, double* values) const;

  /// n x d matrix with row i equal to eval(xs[i]).
  Eigen::MatrixXd design_matrix(const Eigen::VectorXd& xs) const;

  friend bool operator==(const BSplineBasis&, const BSplineBasis&) = default;

 private:
  friend BSplineBasis build_basis(double a, double b, int q, int k);
  friend class SplineFunction;

  BSplineBasis(double a, double b, int q, int k, std::vector<double> knots)
      : lower_(a), upper_(b), inner_knots_(q), degree_(k), knots_(std::move(knots)) {}

  int find_span(double x) const;

  double lower_;
  double upper_;
  int inner_knots_;
  int degree_;
  std::vector<double> knots_;
};

/// Equidistant basis on [a, b]; throws ValidationError on bad arguments.
BSplineBasis build_basis(double a, double b, int q, int k);

/// s(x) = sum_j beta_j N_j(x).
class SplineFunction {
 public:
  SplineFunction(BSplineBasis basis, Eigen::VectorXd coefficients);

  const BSplineBasis& basis() const { return basis_; }
  const Eigen::VectorXd& coefficients() const { return coefficients_; }

  double eval(double x) const;
  double operator()(double x) const { return eval(x); }
  Eigen::VectorXd eval(const Eigen::VectorXd& xs) const;

  /// Derivative as a spline of degree k-1 on the same knot sequence.
  SplineFunction derivative() const;

 private:
  BSplineBasis basis_;
  Eigen::VectorXd coefficients_;
};

}  // namespace peakforge
