#ifndef AVAR_DIFFUSION1D_HPP
#define AVAR_DIFFUSION1D_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "avar/errors.hpp"
#include "avar/quadrature.hpp"

namespace avar::diffusion1d {

using Eigen::VectorXd;
using ScalarFn = std::function<double(double)>;

struct QuadratureConfig {
  quadrature::Rule rule = quadrature::Rule::Simpson;
  double tail_tol = 1e-8;  // allowed probability mass beyond x_max
  int refine_levels = 1;   // grid doublings used by refinement_deltas
};

struct GridSpec {
  double x_max = 0.0;
  int n = 0;  // grid points, abscissae 0, h, ..., x_max
};

// Half-line diffusion dX = b dt + sqrt(2a) dW reflected at 0, sampled on a
// uniform truncated grid. b = a (pi'/pi) + a' with central differences;
// c comes from the exact identity pi(x) a(x) = e^{c(x)} pi(x0) a(x0), so
// c(x0) = 0 and phi(0) = 0 hold by construction.
struct Diffusion1DModel {
  VectorXd x, a, pi, b, c, phi;
  double h = 0.0;
  double x0 = 0.0;
  int i0 = 0;            // grid index of x0
  double tail_mass = 0.0;
  QuadratureConfig quad;

  double interp(const VectorXd& samples, double xq) const;
  double mass() const { return 1.0 - tail_mass; }
};

Diffusion1DModel build_model(const ScalarFn& a, const ScalarFn& pi_density,
                             std::optional<double> x0, const GridSpec& grid,
                             const QuadratureConfig& quad = {});

struct NonExplosionDiagnostic {
  enum class Verdict { Diverging, Inconclusive };
  double partial_integral = 0.0;  // int_0^{x_max} phi'(y) pi([0,y]) dy
  double growth_ratio = 0.0;      // partial integral at x_max over 0.9 x_max
  Verdict verdict = Verdict::Inconclusive;
};

// Heuristic check of int_0^inf phi' pi([0,y]) dy = inf; never claims
// convergence, only "diverging" or "inconclusive".
NonExplosionDiagnostic check_nonexplosive(const Diffusion1DModel& model);

struct AvarResult {
  double sigma2 = 0.0;
  double recenter_shift = 0.0;   // subtracted pi-mean of f
  double inner_tail_bound = 0.0; // tail_mass * sup |f|, the truncation budget
};

// sigma^2/2 = int_0^inf (int_0^x f dpi)^2 / (a pi) dx.
AvarResult avar_quadrature(const Diffusion1DModel& model, const ScalarFn& f);
AvarResult avar_quadrature(const Diffusion1DModel& model,
                           const VectorXd& f_samples);

struct PoissonSolution {
  VectorXd u;   // u(x) = int_0^x e^{-c} (int_y^xmax f e^c / a dz) dy
  VectorXd du;  // u' samples, u'(0) = 0
  double recenter_shift = 0.0;
  double inner_tail_bound = 0.0;
};

PoissonSolution poisson_solution(const Diffusion1DModel& model,
                                 const ScalarFn& f);
PoissonSolution poisson_solution(const Diffusion1DModel& model,
                                 const VectorXd& f_samples);

// max interior residual of -(a u'' + b u') = f, with u'' differenced from
// the u' samples.
double poisson_residual(const Diffusion1DModel& model,
                        const PoissonSolution& sol, const VectorXd& f_samples);

// (u, f)_pi over the grid.
double pi_inner(const Diffusion1DModel& model, const VectorXd& u,
                const VectorXd& v);

// Relative change of sigma^2 at each grid doubling; the quadrature is
// refinement-stable when these sit below 1e-5.
std::vector<double> refinement_deltas(const ScalarFn& a, const ScalarFn& pi,
                                      std::optional<double> x0, GridSpec grid,
                                      const QuadratureConfig& quad,
                                      const ScalarFn& f);

struct CompareResult {
  double sigma2_a = 0.0;
  double sigma2_a1 = 0.0;
  bool confirmed = false;  // sigma2_a <= sigma2_a1 + tol
};

// Requires the two models to share grid and stationary density, and
// a >= a1 pointwise (DominanceViolated otherwise).
CompareResult compare_coefficients(const Diffusion1DModel& model_a,
                                   const Diffusion1DModel& model_a1,
                                   const ScalarFn& f, double tol = 1e-12);

}  // namespace avar::diffusion1d

#endif
