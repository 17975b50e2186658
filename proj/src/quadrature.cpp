#include "avar/quadrature.hpp"

namespace avar::quadrature {

using Eigen::VectorXd;

double integrate(const VectorXd& y, double h, Rule rule) {
  const int n = static_cast<int>(y.size());
  if (n < 2) return 0.0;
  if (rule == Rule::Trapezoid || n < 3) {
    double s = 0.5 * (y(0) + y(n - 1));
    for (int i = 1; i < n - 1; ++i) s += y(i);
    return s * h;
  }
  // Composite Simpson over pairs; odd interval count gets a trapezoid tail.
  int last_even = (n % 2 == 1) ? n - 1 : n - 2;
  double s = 0.0;
  for (int i = 0; i + 2 <= last_even; i += 2)
    s += (y(i) + 4.0 * y(i + 1) + y(i + 2)) * (h / 3.0);
  if (last_even != n - 1) s += 0.5 * h * (y(n - 2) + y(n - 1));
  return s;
}

VectorXd cumulative(const VectorXd& y, double h, Rule rule) {
  const int n = static_cast<int>(y.size());
  VectorXd F = VectorXd::Zero(n);
  if (n < 2) return F;
  if (rule == Rule::Trapezoid || n < 4) {
    for (int i = 1; i < n; ++i) F(i) = F(i - 1) + 0.5 * h * (y(i - 1) + y(i));
    return F;
  }
  // Cubic through (i-1, i, i+1, i+2) integrated over [x_i, x_{i+1}]:
  // h (-y_{i-1} + 13 y_i + 13 y_{i+1} - y_{i+2}) / 24, with Adams-Moulton
  // style one-sided stencils at both ends. Local O(h^5), global O(h^4).
  F(1) = F(0) + h * (9.0 * y(0) + 19.0 * y(1) - 5.0 * y(2) + y(3)) / 24.0;
  for (int i = 1; i < n - 2; ++i)
    F(i + 1) = F(i) +
               h * (-y(i - 1) + 13.0 * y(i) + 13.0 * y(i + 1) - y(i + 2)) / 24.0;
  F(n - 1) = F(n - 2) + h * (9.0 * y(n - 1) + 19.0 * y(n - 2) -
                             5.0 * y(n - 3) + y(n - 4)) / 24.0;
  return F;
}

VectorXd reverse_cumulative(const VectorXd& y, double h, Rule rule) {
  VectorXd flipped = y.reverse();
  VectorXd F = cumulative(flipped, h, rule);
  return F.reverse();
}

}  // namespace avar::quadrature
