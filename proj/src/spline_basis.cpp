#include "peakforge/spline_basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "peakforge/error.hpp"

namespace peakforge {

namespace {

std::string out_of_domain(double x, double a, double b) {
  std::ostringstream os;
  os << "site " << x << " outside basis domain [" << a << ", " << b << "]";
  return os.str();
}

}  // namespace

BSplineBasis build_basis(double a, double b, int q, int k) {
  detail::require(std::isfinite(a) && std::isfinite(b), "basis bounds must be finite");
  detail::require(a < b, "basis requires a < b");
  detail::require(q >= 0, "inner knot count must be >= 0");
  detail::require(k >= 1, "spline degree must be >= 1");

  const int count = q + 2 * k + 2;
  const double h = (b - a) / (q + 1);
  std::vector<double> knots(count);
  for (int i = 0; i < count; ++i) knots[i] = a + (i - k) * h;
  knots[k] = a;
  knots[k + q + 1] = b;
  return BSplineBasis(a, b, q, k, std::move(knots));
}

int BSplineBasis::find_span(double x) const {
  const int first = degree_;
  const int last = degree_ + inner_knots_;
  if (x >= upper_) return last;
  // knots_[s] <= x < knots_[s + 1]
  auto it = std::upper_bound(knots_.begin() + first, knots_.begin() + last + 1, x);
  return static_cast<int>(it - knots_.begin()) - 1;
}

int BSplineBasis::eval_local(double x, double* values) const {
  if (!contains(x)) throw ValidationError(out_of_domain(x, lower_, upper_));
  const int span = find_span(x);
  const int k = degree_;

  // Triangular Cox-de Boor scheme over the k+1 functions supported on the span.
  std::vector<double> left(k + 1), right(k + 1);
  values[0] = 1.0;
  for (int j = 1; j <= k; ++j) {
    left[j] = x - knots_[span + 1 - j];
    right[j] = knots_[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = values[r] / (right[r + 1] + left[j - r]);
      values[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    values[j] = saved;
  }
  return span - k;
}

Eigen::VectorXd BSplineBasis::eval(double x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dimension());
  std::vector<double> local(degree_ + 1);
  const int first = eval_local(x, local.data());
  for (int r = 0; r <= degree_; ++r) out[first + r] = local[r];
  return out;
}

Eigen::MatrixXd BSplineBasis::design_matrix(const Eigen::VectorXd& xs) const {
  detail::require(xs.size() > 0, "design matrix needs at least one site");
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(xs.size(), dimension());
  std::vector<double> local(degree_ + 1);
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    const int first = eval_local(xs[i], local.data());
    for (int r = 0; r <= degree_; ++r) design(i, first + r) = local[r];
  }
  return design;
}

SplineFunction::SplineFunction(BSplineBasis basis, Eigen::VectorXd coefficients)
    : basis_(std::move(basis)), coefficients_(std::move(coefficients)) {
  detail::require(coefficients_.size() == basis_.dimension(),
                  "coefficient count must equal basis dimension");
}

double SplineFunction::eval(double x) const {
  std::vector<double> local(basis_.degree() + 1);
  const int first = basis_.eval_local(x, local.data());
  double sum = 0.0;
  for (int r = 0; r <= basis_.degree(); ++r) sum += coefficients_[first + r] * local[r];
  return sum;
}

Eigen::VectorXd SplineFunction::eval(const Eigen::VectorXd& xs) const {
  Eigen::VectorXd out(xs.size());
  for (Eigen::Index i = 0; i < xs.size(); ++i) out[i] = eval(xs[i]);
  return out;
}

SplineFunction SplineFunction::derivative() const {
  const int k = basis_.degree();
  detail::require(k >= 1, "cannot differentiate a piecewise-constant spline");
  const auto& t = basis_.knots();
  const int d = basis_.dimension();

  Eigen::VectorXd coefs(d - 1);
  for (int j = 1; j < d; ++j) {
    coefs[j - 1] = k * (coefficients_[j] - coefficients_[j - 1]) / (t[j + k] - t[j]);
  }
  std::vector<double> trimmed(t.begin() + 1, t.end() - 1);
  BSplineBasis lowered(basis_.lower(), basis_.upper(), basis_.inner_knots(), k - 1,
                       std::move(trimmed));
  return SplineFunction(std::move(lowered), std::move(coefs));
}

}  // namespace peakforge
