#ifndef AVAR_CHAIN_HPP
#define AVAR_CHAIN_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "avar/errors.hpp"

namespace avar::chain {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kDefaultTol = 1e-10;

// Finite-state continuous-time Markov chain: off-diagonal entries of Q are
// jump rates, rows sum to zero, and the positive-rate digraph is strongly
// connected. Construct through validate_model.
struct CtmcModel {
  MatrixXd Q;
  std::vector<std::string> labels;  // optional, size n when present

  int n() const { return static_cast<int>(Q.rows()); }
};

struct StationaryDistribution {
  VectorXd pi;  // strictly positive, sums to 1, pi Q = 0
};

struct Observable {
  VectorXd f;
  bool centered = false;
};

// The bilinear form E(u,v) = v^T Pi (-Q) u split into its symmetric part S
// (positive semidefinite, kernel contains constants) and skew part A.
struct FormDecomposition {
  MatrixXd S;
  MatrixXd A;

  double operator()(const VectorXd& u, const VectorXd& v) const {
    return v.dot(S * u) + v.dot(A * u);
  }
  double sym(const VectorXd& u) const { return u.dot(S * u); }
};

struct SpectralReport {
  double lambda1 = 0.0;             // spectral gap, 1/time
  double ergodicity_constant = 1.0; // C in  ||P_t u|| <= C e^{-lambda1 t} ||u||
  bool reversible = false;
  bool symmetrized = false;         // true when lambda1 is the gap of the
                                    // additive symmetrization of a
                                    // non-reversible generator
};

struct SectorReport {
  double K = 1.0;          // best constant in |E(u,v)| <= K E(u,u)^1/2 E(v,v)^1/2
  VectorXd u_dir, v_dir;   // attaining directions (pi-mean-zero)
};

// Non-throwing check; returns every violated invariant.
std::vector<ValidationIssue> check_model(const MatrixXd& raw,
                                         double tol = kDefaultTol);

// Throws ValidationError listing all violations.
CtmcModel validate_model(const MatrixXd& raw,
                         std::vector<std::string> labels = {},
                         double tol = kDefaultTol);

StationaryDistribution stationary_distribution(const CtmcModel& model);

// Detailed balance at generator level: max |pi_x q_xy - pi_y q_yx| <= tol.
bool is_reversible(const CtmcModel& model, const StationaryDistribution& pi,
                   double tol = kDefaultTol);

FormDecomposition dirichlet_form(const CtmcModel& model,
                                 const StationaryDistribution& pi);

// Inverse of -Q on pi-mean-zero functions, factorized once so that repeated
// right-hand sides reuse the decomposition. The singular Poisson system is
// pinned by augmenting with the constraint (pi, u) = 0.
class GreenOperator {
 public:
  GreenOperator(const CtmcModel& model, const StationaryDistribution& pi);

  // Solves -Q u = f with (pi, u) = 0. Throws NotCentered when (pi, f)
  // exceeds tol * max(1, |f|_inf), SingularSolve on numerical failure.
  VectorXd solve(const VectorXd& f, double tol = kDefaultTol) const;

 private:
  int n_;
  MatrixXd Q_;
  VectorXd pi_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

// One-shot convenience around GreenOperator.
VectorXd green_solve(const CtmcModel& model, const StationaryDistribution& pi,
                     const VectorXd& f, double tol = kDefaultTol);

// Q* = Pi^{-1} Q^T Pi; same stationary distribution, equals Q iff reversible.
CtmcModel dual_generator(const CtmcModel& model,
                         const StationaryDistribution& pi);

// G_alpha f = (alpha I - Q)^{-1} f, alpha > 0.
VectorXd resolvent_solve(const CtmcModel& model, double alpha,
                         const VectorXd& f);

// sigma^2(X, f) = 2 (Gf, f)_pi for centered f.
double asymptotic_variance_exact(const CtmcModel& model,
                                 const StationaryDistribution& pi,
                                 const VectorXd& f,
                                 double tol = kDefaultTol);

SpectralReport spectral_gap(const CtmcModel& model,
                            const StationaryDistribution& pi);

// Best sector constant, computed as sqrt(1 + mu^2) where mu is the largest
// singular value of the S-whitened skew part on the pi-mean-zero subspace.
// Throws DegenerateForm when S is singular beyond the constants.
SectorReport sector_constant(const CtmcModel& model,
                             const StationaryDistribution& pi);

// Rectangular grid for the 2D reversible-diffusion discretizer.
struct Grid2D {
  int nx = 0, ny = 0;
  double h = 0.0;
  double x_origin = 0.0, y_origin = 0.0;
  bool periodic = false;

  int size() const { return nx * ny; }
  int index(int ix, int iy) const { return ix * ny + iy; }
  double x(int ix) const { return x_origin + h * ix; }
  double y(int iy) const { return y_origin + h * iy; }
};

struct DiscretizedDiffusion {
  CtmcModel model;
  StationaryDistribution pi;
};

// Nearest-neighbor chain with rates
//   q(x, y) = sqrt(a_i(x) a_i(y)) sqrt(pi(y)/pi(x)) / h^2
// along axis i, where pi ∝ e^V; reversible w.r.t. the discrete pi by
// construction. V, a1, a2 are samples indexed by Grid2D::index.
DiscretizedDiffusion from_reversible_diffusion_2d(const Grid2D& grid,
                                                  const VectorXd& V,
                                                  const VectorXd& a1,
                                                  const VectorXd& a2);

// Helpers shared across modules.
double weighted_dot(const VectorXd& pi, const VectorXd& u, const VectorXd& v);
VectorXd center(const VectorXd& pi, const VectorXd& f);

}  // namespace avar::chain

#endif
