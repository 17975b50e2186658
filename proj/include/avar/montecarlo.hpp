#ifndef AVAR_MONTECARLO_HPP
#define AVAR_MONTECARLO_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "avar/chain.hpp"
#include "avar/diffusion1d.hpp"
#include "avar/philox.hpp"

namespace avar::montecarlo {

using chain::CtmcModel;
using chain::StationaryDistribution;
using diffusion1d::Diffusion1DModel;
using Eigen::Vector2d;
using Eigen::VectorXd;

struct SimulationConfig {
  std::uint64_t seed = 0;
  double T = 0.0;        // horizon per replica
  double dt = 1e-3;      // SDE step
  double burn_in = 0.0;
  int n_replicas = 1;
};

struct AvarEstimate {
  double sigma2_hat = 0.0;
  double stderr_ = 0.0;   // batch-means standard error of sigma2_hat
  int n_batches = 0;
  double effective_T = 0.0;
};

// Batch-means accumulator over [burn_in, T), batch count
// floor(sqrt(T - burn_in)) clamped to [16, 1024]. Feed exact time segments
// with constant integrand value; segments are split at batch boundaries.
class BatchAccumulator {
 public:
  BatchAccumulator(double burn_in, double T, int n_batches);

  static int batches_for(double effective_T);

  void add_segment(double t_begin, double t_end, double value);
  bool merged_from(const BatchAccumulator& other);  // replica fold

  AvarEstimate finalize() const;
  int n_batches() const { return static_cast<int>(sums_.size()); }

 private:
  double burn_in_, T_, batch_len_;
  std::vector<double> sums_;
};

// --- finite chains -------------------------------------------------------

struct CtmcPath {
  std::vector<double> times;  // times[0] = 0 at the initial state
  std::vector<int> states;
  double T = 0.0;
};

// Gillespie: exponential holding times, jumps proportional to off-diagonal
// rates, initial state drawn from pi. Stream = replica index.
CtmcPath simulate_ctmc(const CtmcModel& model, const StationaryDistribution& pi,
                       const SimulationConfig& config, std::uint64_t stream = 0);

int sample_index(const VectorXd& pi, Philox4x32& rng);

AvarEstimate estimate_avar_ctmc(const CtmcModel& model,
                                const StationaryDistribution& pi,
                                const VectorXd& f,
                                const SimulationConfig& config);

// --- half-line SDE -------------------------------------------------------

struct SdePath {
  std::vector<double> x;  // positions at t0, t0+dt, ...
  double dt = 0.0;
};

// Euler-Maruyama for dX = b dt + sqrt(2a) dW reflected at 0 (X <- |X|),
// initial point by inverse CDF of the grid density. Throws StepOutOfRange
// when the path leaves the grid beyond x_max.
SdePath simulate_sde_halfline(const Diffusion1DModel& model,
                              const SimulationConfig& config,
                              std::uint64_t stream = 0);

AvarEstimate estimate_avar_sde(const SdePath& path,
                               const diffusion1d::ScalarFn& f,
                               const SimulationConfig& config);

// Streaming variant: simulation and accumulation fused, nothing stored.
AvarEstimate estimate_avar_sde(const Diffusion1DModel& model,
                               const diffusion1d::ScalarFn& f,
                               const SimulationConfig& config);

// --- planar Ornstein-Uhlenbeck with rotation -----------------------------

// dX = B X dt + sqrt(2) dW with B = [[-1, -c], [c, -1]]; the stationary law
// is standard Gaussian for every rotation strength c.
struct OuRotationModel {
  double c = 0.0;

  Eigen::Matrix2d B() const {
    Eigen::Matrix2d b;
    b << -1.0, -c, c, -1.0;
    return b;
  }
  Eigen::Matrix2d Sigma() const { return Eigen::Matrix2d::Identity(); }
  double U(const Vector2d& x) const { return 0.5 * x.squaredNorm(); }
  Vector2d Z(const Vector2d& x) const { return {-c * x(1), c * x(0)}; }
  double lyapunov_residual() const {
    return (B() * Sigma() + Sigma() * B().transpose() +
            2.0 * Eigen::Matrix2d::Identity())
        .cwiseAbs()
        .maxCoeff();
  }
};

enum class OuIntegrator { ExactGaussian, EulerMaruyama };

struct OuPath {
  std::vector<Vector2d> x;
  double dt = 0.0;
};

OuPath simulate_ou_rotation(const OuRotationModel& ou,
                            const SimulationConfig& config,
                            OuIntegrator integrator = OuIntegrator::ExactGaussian,
                            std::uint64_t stream = 0);

AvarEstimate estimate_avar_ou(const OuRotationModel& ou, const Vector2d& v,
                              const SimulationConfig& config,
                              OuIntegrator integrator = OuIntegrator::ExactGaussian);

// sigma^2 for f(x) = v . x from the stationary autocorrelation:
// 2 v^T (-B)^{-1} Sigma v; equals 2 |v|^2 / (1 + c^2) for this family.
double avar_ou_linear_exact(const OuRotationModel& ou, const Vector2d& v);

// max over the sample points of |div(Z e^{-U})|, evaluated analytically as
// (div Z - <grad U, Z>) e^{-U}.
double check_invariance_condition(const OuRotationModel& ou,
                                  const std::vector<Vector2d>& points);

// Generic field version for counterexamples.
double invariance_residual(const std::function<Vector2d(const Vector2d&)>& Z,
                           const std::function<double(const Vector2d&)>& divZ,
                           const std::function<Vector2d(const Vector2d&)>& gradU,
                           const std::function<double(const Vector2d&)>& U,
                           const std::vector<Vector2d>& points);

// Replica concurrency cap: AVAR_LAB_THREADS, else hardware concurrency.
int replica_thread_cap();

}  // namespace avar::montecarlo

#endif
