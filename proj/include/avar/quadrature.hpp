#ifndef AVAR_QUADRATURE_HPP
#define AVAR_QUADRATURE_HPP

#include <Eigen/Dense>

namespace avar::quadrature {

enum class Rule { Trapezoid, Simpson };

// Integral of samples y over a uniform grid with spacing h.
double integrate(const Eigen::VectorXd& y, double h, Rule rule);

// Cumulative integral, F(0) = 0. The Simpson variant integrates the local
// parabola through three neighboring nodes over each subinterval (global
// accuracy O(h^3), one order above trapezoid).
Eigen::VectorXd cumulative(const Eigen::VectorXd& y, double h, Rule rule);

// Reverse cumulative: R(i) = integral from x_i to x_max.
Eigen::VectorXd reverse_cumulative(const Eigen::VectorXd& y, double h,
                                   Rule rule);

}  // namespace avar::quadrature

#endif
