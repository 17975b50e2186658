#ifndef AVAR_LINALG_HPP
#define AVAR_LINALG_HPP

#include <Eigen/Dense>

namespace avar::linalg {

// Orthonormal basis of {z : C^T z = 0}. C is n x k with full column rank;
// returns n x (n - k). Throws Numerical/DegenerateConstraints when the
// columns of C are (numerically) dependent.
Eigen::MatrixXd orthonormal_complement(const Eigen::MatrixXd& C,
                                       double rank_tol = 1e-12);

// max |v_i| convenience, 0 for empty.
double linf(const Eigen::VectorXd& v);

}  // namespace avar::linalg

#endif
