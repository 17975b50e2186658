#include "avar/linalg.hpp"

#include "avar/errors.hpp"

namespace avar::linalg {

Eigen::MatrixXd orthonormal_complement(const Eigen::MatrixXd& C,
                                       double rank_tol) {
  const auto n = C.rows();
  const auto k = C.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(C);
  qr.setThreshold(rank_tol);
  if (qr.rank() < k)
    throw Error(ErrorKind::Numerical, "DegenerateConstraints",
                "constraint vectors are numerically dependent");
  Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  return full.rightCols(n - k);
}

double linf(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace avar::linalg
