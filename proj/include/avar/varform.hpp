#ifndef AVAR_VARFORM_HPP
#define AVAR_VARFORM_HPP

#include <cstdint>
#include <optional>

#include "avar/chain.hpp"

namespace avar::varform {

using chain::CtmcModel;
using chain::StationaryDistribution;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// The affine set M_{f,delta} = {u : (u, f)_pi = delta}.
struct ConstraintSet {
  VectorXd f;
  double delta = 0.0;

  bool contains(const VectorXd& pi, const VectorXd& u,
                double tol = 1e-10) const {
    return std::abs(chain::weighted_dot(pi, u, f) - delta) <= tol;
  }
};

// Saddle objects from the min-max construction: w = Gf/(Gf,f),
// w* = G*f/(Gf,f), u0 = (w+w*)/2, v0 = (w-w*)/2, value = 1/(Gf,f).
struct SaddlePoint {
  VectorXd w, w_star, u0, v0;
  double value = 0.0;
};

// Extended real for the inner supremum; never a sentinel float.
struct ExtendedReal {
  static ExtendedReal of(double v) { return {true, v}; }
  static ExtendedReal infinity() { return {false, 0.0}; }

  bool is_finite() const { return finite; }
  double value() const { return v; }

  bool finite = true;
  double v = 0.0;
};

struct InnerSupResult {
  ExtendedReal value;
  VectorXd v_opt;  // attaining v in M_{f,0} (empty when value is infinite)
};

enum class MinmaxMethod { Saddle, Optimize };

struct OptimizeOptions {
  int max_iters = 2000;
  double grad_tol = 1e-12;
};

struct OptimizeDiagnostics {
  int iterations = 0;
  double grad_norm = 0.0;
};

SaddlePoint build_saddle(const CtmcModel& model,
                         const StationaryDistribution& pi, const VectorXd& f);

// sup over v in M_{f,0} of E(u+v, u-v) for u in M_{f,1}, via the
// equality-constrained concave quadratic (KKT linear solve).
InnerSupResult inner_sup(const CtmcModel& model,
                         const StationaryDistribution& pi, const VectorXd& f,
                         const VectorXd& u);

// 2/sigma^2(X, f) as inf over M_{f,1} of the inner supremum. The saddle
// method returns 1/(Gf, f); the optimize method runs conjugate-gradient
// descent over a parametrization of M_{f,1}, independent of the Green solve.
double minmax_value(const CtmcModel& model, const StationaryDistribution& pi,
                    const VectorXd& f, MinmaxMethod method,
                    const OptimizeOptions& opts = {},
                    OptimizeDiagnostics* diag = nullptr);

struct ReversibleMin {
  double value = 0.0;
  VectorXd minimizer;
};

// Reversible reduction: min of E(u,u) over M_{f,1} by a Lagrange solve.
ReversibleMin reversible_min(const CtmcModel& model,
                             const StationaryDistribution& pi,
                             const VectorXd& f);

// Randomized check of the saddle inequalities; probes are standard-normal
// directions projected onto the constraint sets.
struct VerificationReport {
  double value_saddle = 0.0;
  double value_optimize = 0.0;
  double sigma2 = 0.0;
  double max_saddle_violation = 0.0;
  int probes = 0;
};

VerificationReport verify_saddle(const CtmcModel& model,
                                 const StationaryDistribution& pi,
                                 const VectorXd& f, int probes,
                                 std::uint64_t seed);

}  // namespace avar::varform

#endif
