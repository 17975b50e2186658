#include "avar/varform.hpp"

#include <cmath>
#include <random>

#include "avar/linalg.hpp"

namespace avar::varform {

namespace {

// Shared reduction: basis Z of {z : (pi, z) = 0, (z, f)_pi = 0}. Both the
// inner supremum and the outer parametrization live here; the form is
// invariant along constants, so dropping them loses nothing.
struct Reduction {
  chain::FormDecomposition form;
  MatrixXd Z;              // n x (n-2)
  Eigen::LDLT<MatrixXd> G; // Z^T S Z, positive definite for valid models
  MatrixXd G_dense;
};

Reduction make_reduction(const CtmcModel& model,
                         const StationaryDistribution& pi, const VectorXd& f) {
  Reduction red;
  red.form = chain::dirichlet_form(model, pi);
  MatrixXd C(model.n(), 2);
  C.col(0) = pi.pi;
  C.col(1) = pi.pi.asDiagonal() * f;
  red.Z = linalg::orthonormal_complement(C);
  red.G_dense = red.Z.transpose() * red.form.S * red.Z;
  red.G_dense = 0.5 * (red.G_dense + red.G_dense.transpose());
  red.G.compute(red.G_dense);
  return red;
}

void require_centered_nonzero(const StationaryDistribution& pi,
                              const VectorXd& f) {
  double norm2 = chain::weighted_dot(pi.pi, f, f);
  if (!(norm2 > 1e-24))
    throw Error(ErrorKind::InvalidInput, "ZeroVariance",
                "observable is (numerically) zero");
  if (std::abs(pi.pi.dot(f)) > 1e-8 * std::max(1.0, linalg::linf(f)))
    throw Error(ErrorKind::InvalidInput, "NotCentered",
                "observable must have zero pi-mean");
}

}  // namespace

SaddlePoint build_saddle(const CtmcModel& model,
                         const StationaryDistribution& pi, const VectorXd& f) {
  require_centered_nonzero(pi, f);
  VectorXd gf = chain::green_solve(model, pi, f);
  double gff = chain::weighted_dot(pi.pi, gf, f);
  if (!(gff > 1e-14 * std::max(1.0, f.squaredNorm())))
    throw Error(ErrorKind::InvalidInput, "ZeroVariance",
                "(Gf, f) is not positive; min-max value is degenerate");

  CtmcModel dual = chain::dual_generator(model, pi);
  VectorXd gf_star = chain::green_solve(dual, pi, f);

  SaddlePoint sp;
  sp.w = gf / gff;
  sp.w_star = gf_star / gff;
  sp.u0 = 0.5 * (sp.w + sp.w_star);
  sp.v0 = 0.5 * (sp.w - sp.w_star);
  sp.value = 1.0 / gff;
  return sp;
}

InnerSupResult inner_sup(const CtmcModel& model,
                         const StationaryDistribution& pi, const VectorXd& f,
                         const VectorXd& u) {
  require_centered_nonzero(pi, f);
  if (std::abs(chain::weighted_dot(pi.pi, u, f) - 1.0) > 1e-8)
    throw Error(ErrorKind::InvalidInput, "NotInConstraintSet",
                "u must satisfy (u, f)_pi = 1");

  Reduction red = make_reduction(model, pi, f);
  VectorXd h = red.Z.transpose() * (red.form.A * u);
  double base = red.form.sym(u);

  // sup_b [-b^T G b - 2 b^T h] = h^T G^{-1} h at b = -G^{-1} h, provided G
  // is positive definite; a flat direction coupled to u makes it +inf.
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(red.G_dense);
  double max_eig = std::max(1.0, es.eigenvalues().maxCoeff());
  const double degenerate_tol = 1e-13 * max_eig;
  if (es.eigenvalues()(0) <= degenerate_tol) {
    VectorXd he = es.eigenvectors().transpose() * h;
    VectorXd b_eig = VectorXd::Zero(h.size());
    for (int i = 0; i < h.size(); ++i) {
      if (es.eigenvalues()(i) <= degenerate_tol) {
        if (std::abs(he(i)) > 1e-10 * max_eig)
          return {ExtendedReal::infinity(), VectorXd()};
      } else {
        b_eig(i) = -he(i) / es.eigenvalues()(i);
      }
    }
    VectorXd b = es.eigenvectors() * b_eig;
    return {ExtendedReal::of(base - b.dot(red.G_dense * b) - 2.0 * b.dot(h)),
            red.Z * b};
  }

  VectorXd b = red.G.solve(-h);
  return {ExtendedReal::of(base + h.dot(-b)), red.Z * b};
}

namespace {

// Objective of the outer minimization over u = u_p + Z a:
//   g(a) = u^T S u + h(u)^T G^{-1} h(u),  h(u) = Z^T A u.
// Convex quadratic; gradient uses the inner KKT solve each iterate.
struct OuterProblem {
  const Reduction& red;
  VectorXd u_p;

  VectorXd u_of(const VectorXd& a) const { return u_p + red.Z * a; }

  double value(const VectorXd& a) const {
    VectorXd u = u_of(a);
    VectorXd h = red.Z.transpose() * (red.form.A * u);
    return red.form.sym(u) + h.dot(red.G.solve(h));
  }

  VectorXd gradient(const VectorXd& a) const {
    VectorXd u = u_of(a);
    VectorXd h = red.Z.transpose() * (red.form.A * u);
    VectorXd inner = red.G.solve(h);
    return 2.0 * (red.Z.transpose() *
                  (red.form.S * u + red.form.A.transpose() * (red.Z * inner)));
  }
};

}  // namespace

double minmax_value(const CtmcModel& model, const StationaryDistribution& pi,
                    const VectorXd& f, MinmaxMethod method,
                    const OptimizeOptions& opts, OptimizeDiagnostics* diag) {
  require_centered_nonzero(pi, f);
  if (method == MinmaxMethod::Saddle) return build_saddle(model, pi, f).value;

  Reduction red = make_reduction(model, pi, f);
  OuterProblem prob{red, f / chain::weighted_dot(pi.pi, f, f)};

  // Conjugate-gradient descent with exact line search; on this quadratic it
  // terminates in at most dim steps up to roundoff.
  const int dim = static_cast<int>(red.Z.cols());
  VectorXd a = VectorXd::Zero(dim);
  VectorXd grad = prob.gradient(a);
  double gscale = std::max(1.0, grad.norm());
  VectorXd dir = -grad;
  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    if (grad.norm() <= opts.grad_tol * gscale) break;
    // Exact step for quadratic g along dir: t = -g'd / d'Hd, with d'Hd
    // recovered from a finite difference of gradients (exact here).
    VectorXd grad_at = prob.gradient(a + dir);
    double dHd = dir.dot(grad_at - grad);
    if (!(dHd > 0.0)) {
      dir = -grad;  // restart on numerical loss of conjugacy
      grad_at = prob.gradient(a + dir);
      dHd = dir.dot(grad_at - grad);
      if (!(dHd > 0.0)) break;
    }
    double t = -grad.dot(dir) / dHd;
    a += t * dir;
    VectorXd grad_new = prob.gradient(a);
    double beta = grad_new.dot(grad_new - grad) / grad.dot(grad);  // PR+
    beta = std::max(0.0, beta);
    if ((iter + 1) % std::max(1, dim) == 0) beta = 0.0;
    dir = -grad_new + beta * dir;
    grad = grad_new;
  }
  if (diag) {
    diag->iterations = iter;
    diag->grad_norm = grad.norm();
  }
  if (grad.norm() > 1e-6 * gscale)
    throw Error(ErrorKind::Numerical, "NonConvergence",
                "optimizer stalled after " + std::to_string(iter) +
                    " iterations, |grad| = " + std::to_string(grad.norm()));
  return prob.value(a);
}

ReversibleMin reversible_min(const CtmcModel& model,
                             const StationaryDistribution& pi,
                             const VectorXd& f) {
  if (!chain::is_reversible(model, pi, 1e-8))
    throw Error(ErrorKind::InvalidInput, "NotReversible",
                "reversible_min requires a reversible model");
  require_centered_nonzero(pi, f);

  const int n = model.n();
  chain::FormDecomposition form = chain::dirichlet_form(model, pi);
  VectorXd c = pi.pi.asDiagonal() * f;

  // Stationarity 2 S u = lambda c + mu pi with (c, u) = 1, (pi, u) = 0;
  // the pi-constraint pins the constant direction in ker S.
  MatrixXd K = MatrixXd::Zero(n + 2, n + 2);
  K.topLeftCorner(n, n) = 2.0 * form.S;
  K.block(0, n, n, 1) = -c;
  K.block(0, n + 1, n, 1) = -pi.pi;
  K.block(n, 0, 1, n) = c.transpose();
  K.block(n + 1, 0, 1, n) = pi.pi.transpose();
  VectorXd rhs = VectorXd::Zero(n + 2);
  rhs(n) = 1.0;

  Eigen::PartialPivLU<MatrixXd> lu(K);
  VectorXd sol = lu.solve(rhs);
  VectorXd u = sol.head(n);
  if (!((K * sol - rhs).cwiseAbs().maxCoeff() <= 1e-8))
    throw Error(ErrorKind::Numerical, "SingularSolve",
                "Lagrange system for the reversible minimum is singular");

  ReversibleMin out;
  out.minimizer = u;
  out.value = form.sym(u);
  if (!(out.value > 0.0))
    throw Error(ErrorKind::InvalidInput, "ZeroVariance",
                "constrained minimum is not positive");
  return out;
}

VerificationReport verify_saddle(const CtmcModel& model,
                                 const StationaryDistribution& pi,
                                 const VectorXd& f, int probes,
                                 std::uint64_t seed) {
  VerificationReport report;
  report.probes = probes;
  SaddlePoint sp = build_saddle(model, pi, f);
  report.value_saddle = sp.value;
  report.value_optimize = minmax_value(model, pi, f, MinmaxMethod::Optimize);
  report.sigma2 =
      chain::asymptotic_variance_exact(model, pi, f);

  chain::FormDecomposition form = chain::dirichlet_form(model, pi);
  MatrixXd C = pi.pi.asDiagonal() * f;
  MatrixXd Z = linalg::orthonormal_complement(C);  // span of M_{f,0}

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  const int n = model.n();
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    VectorXd raw(n - 1);
    for (int i = 0; i < n - 1; ++i) raw(i) = gauss(rng);
    VectorXd z = Z * raw;  // (z, f)_pi = 0

    // sup side: v = z in M_{f,0} must not beat the value.
    double upper = form(sp.u0 + z, sp.u0 - z);
    worst = std::max(worst, upper - sp.value);

    // inf side: u = u0 + z in M_{f,1} must not undercut it.
    VectorXd u = sp.u0 + z;
    double lower = form(u + sp.v0, u - sp.v0);
    worst = std::max(worst, sp.value - lower);
  }
  report.max_saddle_violation = worst;
  return report;
}

}  // namespace avar::varform
