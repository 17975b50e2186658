#include "avar/diffusion1d.hpp"

#include <algorithm>
#include <cmath>

namespace avar::diffusion1d {

using quadrature::cumulative;
using quadrature::integrate;
using quadrature::reverse_cumulative;
using quadrature::Rule;

namespace {

VectorXd central_derivative(const VectorXd& y, double h) {
  const int n = static_cast<int>(y.size());
  VectorXd d(n);
  d(0) = (-3.0 * y(0) + 4.0 * y(1) - y(2)) / (2.0 * h);
  for (int i = 1; i < n - 1; ++i) d(i) = (y(i + 1) - y(i - 1)) / (2.0 * h);
  d(n - 1) = (3.0 * y(n - 1) - 4.0 * y(n - 2) + y(n - 3)) / (2.0 * h);
  return d;
}

VectorXd sample_fn(const ScalarFn& f, const VectorXd& x) {
  VectorXd out(x.size());
  for (int i = 0; i < x.size(); ++i) out(i) = f(x(i));
  return out;
}

// Recenter f against the grid pi, erroring out when the defect is too large
// to be quadrature noise. The trapezoid gate scales with its O(h^2) error.
VectorXd recentered(const Diffusion1DModel& model, const VectorXd& f,
                    double* shift_out) {
  double mass = integrate(model.pi, model.h, model.quad.rule);
  double mean =
      integrate((model.pi.array() * f.array()).matrix(), model.h,
                model.quad.rule) /
      mass;
  double scale = std::max(1.0, f.cwiseAbs().maxCoeff());
  double gate = model.quad.rule == Rule::Trapezoid
                    ? std::max(1e-6, model.h * model.h)
                    : 1e-6;
  if (std::abs(mean) > gate * scale)
    throw Error(ErrorKind::InvalidInput, "NotCentered",
                "observable pi-mean " + std::to_string(mean) +
                    " exceeds the auto-recenter threshold");
  if (shift_out) *shift_out = mean;
  return f.array() - mean;
}

}  // namespace

double Diffusion1DModel::interp(const VectorXd& samples, double xq) const {
  const int n = static_cast<int>(x.size());
  if (xq <= 0.0) return samples(0);
  if (xq >= x(n - 1)) return samples(n - 1);
  int i = std::min(static_cast<int>(xq / h), n - 2);
  double t = (xq - x(i)) / h;
  return (1.0 - t) * samples(i) + t * samples(i + 1);
}

Diffusion1DModel build_model(const ScalarFn& a, const ScalarFn& pi_density,
                             std::optional<double> x0, const GridSpec& grid,
                             const QuadratureConfig& quad) {
  if (grid.n < 5 || !(grid.x_max > 0.0))
    throw Error(ErrorKind::InvalidInput, "BadGrid",
                "grid needs x_max > 0 and at least 5 points");
  if (!(quad.tail_tol > 0.0) || quad.tail_tol > 1e-3)
    throw Error(ErrorKind::InvalidInput, "BadConfig",
                "tail tolerance must lie in (0, 1e-3]");

  Diffusion1DModel m;
  m.quad = quad;
  m.h = grid.x_max / (grid.n - 1);
  m.x = VectorXd::LinSpaced(grid.n, 0.0, grid.x_max);
  m.a = sample_fn(a, m.x);
  m.pi = sample_fn(pi_density, m.x);

  for (int i = 0; i < grid.n; ++i) {
    if (!(m.a(i) > 0.0))
      throw Error(ErrorKind::InvalidInput, "NonpositiveInput",
                  "diffusion coefficient non-positive at x = " +
                      std::to_string(m.x(i)));
    if (!(m.pi(i) > 0.0))
      throw Error(ErrorKind::InvalidInput, "NonpositiveInput",
                  "stationary density non-positive at x = " +
                      std::to_string(m.x(i)));
  }

  double mass = integrate(m.pi, m.h, quad.rule);
  m.tail_mass = std::max(0.0, 1.0 - mass);  // rule error can overshoot 1
  if (m.tail_mass > quad.tail_tol)
    throw Error(ErrorKind::InvalidInput, "TailMassTooLarge",
                "mass beyond x_max is " + std::to_string(m.tail_mass) +
                    "; enlarge x_max");
  if (mass > 1.0 + 1e-4)
    throw Error(ErrorKind::InvalidInput, "NotNormalized",
                "density integrates to " + std::to_string(mass) + " > 1");

  // Reference point: explicit, or the pi-median.
  VectorXd cum_mass = cumulative(m.pi, m.h, quad.rule);
  if (x0) {
    if (!(*x0 > 0.0) || *x0 >= grid.x_max)
      throw Error(ErrorKind::InvalidInput, "BadConfig",
                  "x0 must lie strictly inside (0, x_max)");
    m.i0 = static_cast<int>(std::lround(*x0 / m.h));
    m.i0 = std::clamp(m.i0, 1, grid.n - 2);
  } else {
    m.i0 = 1;
    while (m.i0 < grid.n - 2 && cum_mass(m.i0) < 0.5 * mass) ++m.i0;
  }
  m.x0 = m.x(m.i0);

  // b = a (pi'/pi) + a' from central differences; c from the exact identity
  // pi a = e^c pi(x0) a(x0).
  VectorXd dpi = central_derivative(m.pi, m.h);
  VectorXd da = central_derivative(m.a, m.h);
  m.b = (m.a.array() * dpi.array() / m.pi.array() + da.array()).matrix();

  VectorXd log_pa = (m.pi.array() * m.a.array()).log();
  m.c = log_pa.array() - log_pa(m.i0);
  m.phi = cumulative((-m.c).array().exp().matrix(), m.h, quad.rule);
  return m;
}

NonExplosionDiagnostic check_nonexplosive(const Diffusion1DModel& model) {
  const int n = static_cast<int>(model.x.size());
  VectorXd mass = cumulative(model.pi, model.h, model.quad.rule);
  VectorXd integrand =
      ((-model.c).array().exp() * mass.array()).matrix();
  VectorXd partial = cumulative(integrand, model.h, model.quad.rule);

  NonExplosionDiagnostic diag;
  diag.partial_integral = partial(n - 1);
  int i90 = static_cast<int>(0.9 * (n - 1));
  diag.growth_ratio = partial(n - 1) / std::max(partial(i90), 1e-300);
  double x_max = model.x(n - 1);
  if (x_max > 2.0 && diag.growth_ratio >= 1.05)
    diag.verdict = NonExplosionDiagnostic::Verdict::Diverging;
  else
    diag.verdict = NonExplosionDiagnostic::Verdict::Inconclusive;
  return diag;
}

AvarResult avar_quadrature(const Diffusion1DModel& model,
                           const VectorXd& f_samples) {
  AvarResult result;
  VectorXd fc = recentered(model, f_samples, &result.recenter_shift);
  result.inner_tail_bound = model.tail_mass * fc.cwiseAbs().maxCoeff();

  VectorXd fpi = (fc.array() * model.pi.array()).matrix();
  VectorXd F = cumulative(fpi, model.h, model.quad.rule);
  VectorXd integrand =
      (F.array().square() / (model.a.array() * model.pi.array())).matrix();
  result.sigma2 = 2.0 * integrate(integrand, model.h, model.quad.rule);
  return result;
}

AvarResult avar_quadrature(const Diffusion1DModel& model, const ScalarFn& f) {
  return avar_quadrature(model, sample_fn(f, model.x));
}

PoissonSolution poisson_solution(const Diffusion1DModel& model,
                                 const VectorXd& f_samples) {
  PoissonSolution sol;
  VectorXd fc = recentered(model, f_samples, &sol.recenter_shift);
  sol.inner_tail_bound = model.tail_mass * fc.cwiseAbs().maxCoeff();

  // inner(y) = int_y^{x_max} f e^c / a dz, truncated at the grid edge with
  // the tail bounded by tail_mass * sup|f| (reported, not silently dropped).
  VectorXd weight =
      (fc.array() * model.c.array().exp() / model.a.array()).matrix();
  VectorXd inner = reverse_cumulative(weight, model.h, model.quad.rule);
  sol.du = ((-model.c).array().exp() * inner.array()).matrix();
  sol.u = cumulative(sol.du, model.h, model.quad.rule);
  return sol;
}

PoissonSolution poisson_solution(const Diffusion1DModel& model,
                                 const ScalarFn& f) {
  return poisson_solution(model, sample_fn(f, model.x));
}

double poisson_residual(const Diffusion1DModel& model,
                        const PoissonSolution& sol,
                        const VectorXd& f_samples) {
  const int n = static_cast<int>(model.x.size());
  VectorXd fc = f_samples.array() - sol.recenter_shift;
  double worst = 0.0;
  // Skip a boundary layer where the one-sided stencils live.
  for (int i = 1; i + 1 < n; ++i) {
    double ddu = (sol.du(i + 1) - sol.du(i - 1)) / (2.0 * model.h);
    double residual = -(model.a(i) * ddu + model.b(i) * sol.du(i)) - fc(i);
    worst = std::max(worst, std::abs(residual));
  }
  return worst;
}

double pi_inner(const Diffusion1DModel& model, const VectorXd& u,
                const VectorXd& v) {
  return integrate((model.pi.array() * u.array() * v.array()).matrix(),
                   model.h, model.quad.rule);
}

std::vector<double> refinement_deltas(const ScalarFn& a, const ScalarFn& pi,
                                      std::optional<double> x0, GridSpec grid,
                                      const QuadratureConfig& quad,
                                      const ScalarFn& f) {
  std::vector<double> deltas;
  double prev = avar_quadrature(build_model(a, pi, x0, grid, quad), f).sigma2;
  for (int level = 0; level < quad.refine_levels; ++level) {
    grid.n = 2 * (grid.n - 1) + 1;
    double next = avar_quadrature(build_model(a, pi, x0, grid, quad), f).sigma2;
    deltas.push_back(std::abs(next - prev) /
                     std::max(std::abs(next), 1e-300));
    prev = next;
  }
  return deltas;
}

CompareResult compare_coefficients(const Diffusion1DModel& model_a,
                                   const Diffusion1DModel& model_a1,
                                   const ScalarFn& f, double tol) {
  if (model_a.x.size() != model_a1.x.size() ||
      std::abs(model_a.x(model_a.x.size() - 1) -
               model_a1.x(model_a1.x.size() - 1)) > 1e-12)
    throw Error(ErrorKind::InvalidInput, "GridMismatch",
                "comparison requires a shared grid");
  if ((model_a.pi - model_a1.pi).cwiseAbs().maxCoeff() >
      1e-10 * model_a.pi.maxCoeff())
    throw Error(ErrorKind::InvalidInput, "DensityMismatch",
                "comparison requires a shared stationary density");
  for (int i = 0; i < model_a.x.size(); ++i)
    if (model_a.a(i) < model_a1.a(i) - 1e-12)
      throw Error(ErrorKind::InvalidInput, "DominanceViolated",
                  "a >= a1 fails at x = " + std::to_string(model_a.x(i)));

  CompareResult result;
  result.sigma2_a = avar_quadrature(model_a, f).sigma2;
  result.sigma2_a1 = avar_quadrature(model_a1, f).sigma2;
  result.confirmed = result.sigma2_a <= result.sigma2_a1 +
                                            tol * std::max(1.0, result.sigma2_a1);
  return result;
}

}  // namespace avar::diffusion1d
