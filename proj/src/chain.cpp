#include "avar/chain.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "avar/linalg.hpp"

namespace avar::chain {

namespace {

// Forward/backward reachability from state 0 over positive off-diagonal
// rates; both covering all states is equivalent to strong connectivity.
std::vector<int> unreachable_states(const MatrixXd& Q, bool reverse) {
  const int n = static_cast<int>(Q.rows());
  std::vector<char> seen(n, 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  while (!queue.empty()) {
    int x = queue.front();
    queue.pop_front();
    for (int y = 0; y < n; ++y) {
      if (y == x || seen[y]) continue;
      double rate = reverse ? Q(y, x) : Q(x, y);
      if (rate > 0.0) {
        seen[y] = 1;
        queue.push_back(y);
      }
    }
  }
  std::vector<int> missing;
  for (int x = 0; x < n; ++x)
    if (!seen[x]) missing.push_back(x);
  return missing;
}

}  // namespace

std::vector<ValidationIssue> check_model(const MatrixXd& raw, double tol) {
  std::vector<ValidationIssue> issues;
  if (raw.rows() != raw.cols() || raw.rows() < 2) {
    issues.push_back({"NotSquare", -1, -1, 0.0,
                      "rate matrix must be square with at least two states"});
    return issues;
  }
  const int n = static_cast<int>(raw.rows());
  const double scale = std::max(1.0, raw.cwiseAbs().maxCoeff());

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && raw(i, j) < -tol * scale) {
        std::ostringstream msg;
        msg << "negative off-diagonal rate Q(" << i << "," << j
            << ") = " << raw(i, j);
        issues.push_back({"NegativeOffDiagonal", i, j, raw(i, j), msg.str()});
      }

  for (int i = 0; i < n; ++i) {
    double row_sum = raw.row(i).sum();
    if (std::abs(row_sum) > tol * scale * n) {
      std::ostringstream msg;
      msg << "row " << i << " sums to " << row_sum;
      issues.push_back({"NonzeroRowSum", i, -1, row_sum, msg.str()});
    }
  }

  for (bool reverse : {false, true}) {
    auto missing = unreachable_states(raw, reverse);
    if (!missing.empty()) {
      std::ostringstream msg;
      msg << "state " << missing.front()
          << (reverse ? " cannot reach state 0" : " is unreachable from state 0")
          << " (" << missing.size() << " state(s) affected)";
      issues.push_back({"Reducible", missing.front(), -1, 0.0, msg.str()});
      break;
    }
  }
  return issues;
}

CtmcModel validate_model(const MatrixXd& raw, std::vector<std::string> labels,
                         double tol) {
  auto issues = check_model(raw, tol);
  if (!labels.empty() && static_cast<int>(labels.size()) != raw.rows())
    issues.push_back({"LabelCount", -1, -1, static_cast<double>(labels.size()),
                      "label count does not match state count"});
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return CtmcModel{raw, std::move(labels)};
}

StationaryDistribution stationary_distribution(const CtmcModel& model) {
  const int n = model.n();
  // Augmented system [[Q^T, 1], [1^T, 0]] [pi; mu] = [0; 1]: nonsingular
  // exactly when the null space of Q^T is one-dimensional.
  MatrixXd K = MatrixXd::Zero(n + 1, n + 1);
  K.topLeftCorner(n, n) = model.Q.transpose();
  K.topRightCorner(n, 1).setOnes();
  K.bottomLeftCorner(1, n).setOnes();
  VectorXd rhs = VectorXd::Zero(n + 1);
  rhs(n) = 1.0;

  Eigen::FullPivLU<MatrixXd> lu(K);
  if (!lu.isInvertible())
    throw Error(ErrorKind::Numerical, "SingularSolve",
                "stationary solve: null space of Q^T is not one-dimensional");
  VectorXd sol = lu.solve(rhs);
  VectorXd pi = sol.head(n);

  double residual = (model.Q.transpose() * pi).cwiseAbs().maxCoeff();
  if (residual > 1e-10 * std::max(1.0, model.Q.cwiseAbs().maxCoeff()) ||
      pi.minCoeff() <= 0.0)
    throw Error(ErrorKind::Numerical, "SingularSolve",
                "stationary solve failed: residual " + std::to_string(residual));
  pi /= pi.sum();
  return StationaryDistribution{pi};
}

bool is_reversible(const CtmcModel& model, const StationaryDistribution& pi,
                   double tol) {
  const int n = model.n();
  double worst = 0.0;
  for (int x = 0; x < n; ++x)
    for (int y = x + 1; y < n; ++y)
      worst = std::max(worst, std::abs(pi.pi(x) * model.Q(x, y) -
                                       pi.pi(y) * model.Q(y, x)));
  return worst <= tol;
}

FormDecomposition dirichlet_form(const CtmcModel& model,
                                 const StationaryDistribution& pi) {
  MatrixXd M = pi.pi.asDiagonal() * (-model.Q);
  FormDecomposition form;
  form.S = 0.5 * (M + M.transpose());
  form.A = 0.5 * (M - M.transpose());
  return form;
}

GreenOperator::GreenOperator(const CtmcModel& model,
                             const StationaryDistribution& pi)
    : n_(model.n()), Q_(model.Q), pi_(pi.pi) {
  MatrixXd K = MatrixXd::Zero(n_ + 1, n_ + 1);
  K.topLeftCorner(n_, n_) = -Q_;
  K.topRightCorner(n_, 1).setOnes();
  K.bottomLeftCorner(1, n_) = pi_.transpose();
  lu_.compute(K);
}

VectorXd GreenOperator::solve(const VectorXd& f, double tol) const {
  double mean = pi_.dot(f);
  double fscale = std::max(1.0, linalg::linf(f));
  if (std::abs(mean) > tol * fscale)
    throw Error(ErrorKind::InvalidInput, "NotCentered",
                "observable has pi-mean " + std::to_string(mean));

  VectorXd rhs(n_ + 1);
  rhs.head(n_) = f;
  rhs(n_) = 0.0;
  VectorXd sol = lu_.solve(rhs);
  VectorXd u = sol.head(n_);

  // The multiplier absorbs the (tiny) centering defect; check against the
  // centered right-hand side.
  VectorXd fc = f.array() - mean;
  double residual = linalg::linf(Q_ * u + fc);
  if (!(residual <= 1e-9 * std::max(fscale, linalg::linf(fc))))
    throw Error(ErrorKind::Numerical, "SingularSolve",
                "Poisson solve residual " + std::to_string(residual));
  return u;
}

VectorXd green_solve(const CtmcModel& model, const StationaryDistribution& pi,
                     const VectorXd& f, double tol) {
  return GreenOperator(model, pi).solve(f, tol);
}

CtmcModel dual_generator(const CtmcModel& model,
                         const StationaryDistribution& pi) {
  MatrixXd Qd = pi.pi.asDiagonal().inverse() * model.Q.transpose() *
                pi.pi.asDiagonal();
  return CtmcModel{Qd, model.labels};
}

VectorXd resolvent_solve(const CtmcModel& model, double alpha,
                         const VectorXd& f) {
  if (!(alpha > 0.0))
    throw Error(ErrorKind::InvalidInput, "InvalidAlpha",
                "resolvent requires alpha > 0");
  const int n = model.n();
  MatrixXd K = alpha * MatrixXd::Identity(n, n) - model.Q;
  Eigen::PartialPivLU<MatrixXd> lu(K);
  VectorXd u = lu.solve(f);
  double residual = linalg::linf(K * u - f);
  if (!(residual <= 1e-8 * std::max(1.0, linalg::linf(f))))
    throw Error(ErrorKind::Numerical, "SingularSolve",
                "resolvent solve residual " + std::to_string(residual));
  return u;
}

double asymptotic_variance_exact(const CtmcModel& model,
                                 const StationaryDistribution& pi,
                                 const VectorXd& f, double tol) {
  VectorXd u = green_solve(model, pi, f, tol);
  return 2.0 * weighted_dot(pi.pi, u, f);
}

SpectralReport spectral_gap(const CtmcModel& model,
                            const StationaryDistribution& pi) {
  FormDecomposition form = dirichlet_form(model, pi);
  VectorXd d = pi.pi.cwiseSqrt();
  MatrixXd B = d.cwiseInverse().asDiagonal() * form.S *
               d.cwiseInverse().asDiagonal();
  B = 0.5 * (B + B.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(B);

  SpectralReport report;
  report.reversible = is_reversible(model, pi);
  report.symmetrized = !report.reversible;
  report.lambda1 = es.eigenvalues()(1);
  // The symmetric part controls d/dt ||P_t u||^2, so C = 1 holds for the
  // symmetrized gap even without reversibility.
  report.ergodicity_constant = 1.0;
  return report;
}

SectorReport sector_constant(const CtmcModel& model,
                             const StationaryDistribution& pi) {
  const int n = model.n();
  FormDecomposition form = dirichlet_form(model, pi);
  MatrixXd Z = linalg::orthonormal_complement(pi.pi);
  MatrixXd Sr = Z.transpose() * form.S * Z;
  Sr = 0.5 * (Sr + Sr.transpose());
  MatrixXd Ar = Z.transpose() * form.A * Z;

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Sr);
  double max_eig = es.eigenvalues()(n - 2);
  double min_eig = es.eigenvalues()(0);
  if (!(min_eig > 1e-12 * std::max(1.0, max_eig)))
    throw Error(ErrorKind::Numerical, "DegenerateForm",
                "symmetric part singular beyond constants; sector constant "
                "is unbounded (K = inf)");

  VectorXd inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  MatrixXd white = es.eigenvectors() * inv_sqrt.asDiagonal() *
                   es.eigenvectors().transpose();
  MatrixXd W = white * Ar * white;

  Eigen::JacobiSVD<MatrixXd> svd(W, Eigen::ComputeFullU | Eigen::ComputeFullV);
  double mu = svd.singularValues()(0);

  SectorReport report;
  report.K = std::sqrt(1.0 + mu * mu);
  // Right/left singular pair of I + W maximizes y^T (I + W) x; map back
  // through the whitening and the mean-zero basis.
  VectorXd x = svd.matrixV().col(0);
  VectorXd y_raw = x + W * x;
  report.u_dir = Z * (white * x);
  report.v_dir = Z * (white * (y_raw / y_raw.norm()));
  return report;
}

DiscretizedDiffusion from_reversible_diffusion_2d(const Grid2D& grid,
                                                  const VectorXd& V,
                                                  const VectorXd& a1,
                                                  const VectorXd& a2) {
  const int n = grid.size();
  if (grid.nx < 2 || grid.ny < 2 || !(grid.h > 0.0))
    throw Error(ErrorKind::InvalidInput, "BadGrid",
                "grid must be at least 2x2 with positive spacing");
  if (V.size() != n || a1.size() != n || a2.size() != n)
    throw Error(ErrorKind::InvalidInput, "BadGrid",
                "sample arrays must match grid size");
  for (int i = 0; i < n; ++i)
    if (!(a1(i) > 0.0) || !(a2(i) > 0.0))
      throw Error(ErrorKind::InvalidInput, "NonpositiveCoefficient",
                  "diffusion coefficient must be strictly positive at node " +
                      std::to_string(i));

  const double inv_h2 = 1.0 / (grid.h * grid.h);
  MatrixXd Q = MatrixXd::Zero(n, n);
  auto link = [&](int from, int to, const VectorXd& a) {
    double rate = std::sqrt(a(from) * a(to)) *
                  std::exp(0.5 * (V(to) - V(from))) * inv_h2;
    Q(from, to) += rate;
  };
  for (int ix = 0; ix < grid.nx; ++ix) {
    for (int iy = 0; iy < grid.ny; ++iy) {
      int from = grid.index(ix, iy);
      if (ix + 1 < grid.nx) {
        link(from, grid.index(ix + 1, iy), a1);
        link(grid.index(ix + 1, iy), from, a1);
      } else if (grid.periodic && grid.nx > 2) {
        link(from, grid.index(0, iy), a1);
        link(grid.index(0, iy), from, a1);
      }
      if (iy + 1 < grid.ny) {
        link(from, grid.index(ix, iy + 1), a2);
        link(grid.index(ix, iy + 1), from, a2);
      } else if (grid.periodic && grid.ny > 2) {
        link(from, grid.index(ix, 0), a2);
        link(grid.index(ix, 0), from, a2);
      }
    }
  }
  for (int i = 0; i < n; ++i) Q(i, i) = -Q.row(i).sum();

  VectorXd pi = (V.array() - V.maxCoeff()).exp();
  pi /= pi.sum();

  DiscretizedDiffusion out;
  out.model = CtmcModel{Q, {}};
  out.pi = StationaryDistribution{pi};
  return out;
}

double weighted_dot(const VectorXd& pi, const VectorXd& u, const VectorXd& v) {
  return (pi.array() * u.array() * v.array()).sum();
}

VectorXd center(const VectorXd& pi, const VectorXd& f) {
  return f.array() - pi.dot(f);
}

}  // namespace avar::chain

namespace avar {

std::string ValidationError::join_messages(
    const std::vector<ValidationIssue>& issues) {
  std::string out = "model validation failed:";
  for (const auto& issue : issues) out += "\n  " + issue.message;
  return out;
}

}  // namespace avar
