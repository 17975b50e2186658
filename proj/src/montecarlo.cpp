#include "avar/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace avar::montecarlo {

// --- batch means ----------------------------------------------------------

BatchAccumulator::BatchAccumulator(double burn_in, double T, int n_batches)
    : burn_in_(burn_in), T_(T) {
  if (!(T > burn_in) || burn_in < 0.0)
    throw Error(ErrorKind::InvalidInput, "BadConfig",
                "need T > burn_in >= 0");
  batch_len_ = (T - burn_in) / n_batches;
  sums_.assign(n_batches, 0.0);
}

int BatchAccumulator::batches_for(double effective_T) {
  int raw = static_cast<int>(std::floor(std::sqrt(effective_T)));
  if (raw < 16)
    throw Error(ErrorKind::Statistical, "TooFewBatches",
                "horizon supports only " + std::to_string(raw) +
                    " batches; need at least 16");
  return std::min(raw, 1024);
}

void BatchAccumulator::add_segment(double t_begin, double t_end,
                                   double value) {
  t_begin = std::max(t_begin, burn_in_);
  t_end = std::min(t_end, T_);
  if (!(t_end > t_begin)) return;
  const int nb = static_cast<int>(sums_.size());
  int k = std::min(static_cast<int>((t_begin - burn_in_) / batch_len_), nb - 1);
  while (t_begin < t_end) {
    double boundary = burn_in_ + (k + 1) * batch_len_;
    double upto = (k == nb - 1) ? t_end : std::min(t_end, boundary);
    sums_[k] += value * (upto - t_begin);
    t_begin = upto;
    ++k;
  }
}

bool BatchAccumulator::merged_from(const BatchAccumulator& other) {
  if (std::abs(other.batch_len_ - batch_len_) >
      1e-12 * std::max(1.0, batch_len_))
    return false;
  sums_.insert(sums_.end(), other.sums_.begin(), other.sums_.end());
  return true;
}

AvarEstimate BatchAccumulator::finalize() const {
  const int nb = static_cast<int>(sums_.size());
  AvarEstimate est;
  est.n_batches = nb;
  est.effective_T = batch_len_ * nb;
  double mean = 0.0;
  for (double s : sums_) mean += s;
  mean /= nb;
  double var = 0.0;
  for (double s : sums_) var += (s - mean) * (s - mean);
  var /= std::max(1, nb - 1);
  // Batch integrals have variance ~ batch_len * sigma^2.
  est.sigma2_hat = var / batch_len_;
  est.stderr_ = nb >= 2 ? est.sigma2_hat * std::sqrt(2.0 / (nb - 1)) : 0.0;
  return est;
}

int replica_thread_cap() {
  if (const char* env = std::getenv("AVAR_LAB_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

// Runs fn(replica) for every replica, at most `cap` at a time, then lets the
// caller fold results in index order (deterministic regardless of timing).
template <typename Fn>
void run_replicas(int n_replicas, Fn&& fn) {
  int cap = std::min(replica_thread_cap(), n_replicas);
  if (cap <= 1) {
    for (int r = 0; r < n_replicas; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(cap);
  std::atomic<int> next{0};
  for (int t = 0; t < cap; ++t)
    pool.emplace_back([&] {
      for (int r = next.fetch_add(1); r < n_replicas; r = next.fetch_add(1))
        fn(r);
    });
  for (auto& th : pool) th.join();
}

void check_config(const SimulationConfig& config) {
  if (!(config.T > config.burn_in) || config.burn_in < 0.0 ||
      config.n_replicas < 1)
    throw Error(ErrorKind::InvalidInput, "BadConfig",
                "need T > burn_in >= 0 and n_replicas >= 1");
}

AvarEstimate pooled_estimate(std::vector<BatchAccumulator>& accs) {
  for (std::size_t r = 1; r < accs.size(); ++r)
    if (!accs[0].merged_from(accs[r]))
      throw Error(ErrorKind::Numerical, "MergeMismatch",
                  "replica batch layouts disagree");
  return accs[0].finalize();
}

}  // namespace

// --- finite chains --------------------------------------------------------

int sample_index(const VectorXd& pi, Philox4x32& rng) {
  double u = rng.uniform01();
  double acc = 0.0;
  const int n = static_cast<int>(pi.size());
  for (int i = 0; i < n; ++i) {
    acc += pi(i);
    if (u < acc) return i;
  }
  return n - 1;
}

namespace {

// Core Gillespie loop; on_segment(t0, t1, state) covers [0, T) exactly.
template <typename Cb>
void gillespie(const CtmcModel& model, const StationaryDistribution& pi,
               double T, Philox4x32& rng, Cb&& on_segment) {
  const int n = model.n();
  int state = sample_index(pi.pi, rng);
  double t = 0.0;
  while (t < T) {
    double rate = -model.Q(state, state);
    double hold = rng.exponential(rate);
    double t_next = t + hold;
    on_segment(t, std::min(t_next, T), state);
    if (t_next >= T) break;
    double u = rng.uniform01() * rate;
    double acc = 0.0;
    int next = -1;
    for (int y = 0; y < n; ++y) {
      if (y == state) continue;
      acc += model.Q(state, y);
      if (u < acc) {
        next = y;
        break;
      }
    }
    if (next < 0) {  // rounding fell off the row scan
      for (int y = n - 1; y >= 0; --y)
        if (y != state && model.Q(state, y) > 0.0) {
          next = y;
          break;
        }
    }
    state = next;
    t = t_next;
  }
}

}  // namespace

CtmcPath simulate_ctmc(const CtmcModel& model, const StationaryDistribution& pi,
                       const SimulationConfig& config, std::uint64_t stream) {
  Philox4x32 rng(config.seed, stream);
  CtmcPath path;
  path.T = config.T;
  int last = -1;
  gillespie(model, pi, config.T, rng,
            [&](double t0, double, int state) {
              if (state != last || path.times.empty()) {
                path.times.push_back(t0);
                path.states.push_back(state);
                last = state;
              }
            });
  if (path.times.empty()) {  // zero horizon: initial state only
    Philox4x32 fresh(config.seed, stream);
    path.times.push_back(0.0);
    path.states.push_back(sample_index(pi.pi, fresh));
  }
  return path;
}

AvarEstimate estimate_avar_ctmc(const CtmcModel& model,
                                const StationaryDistribution& pi,
                                const VectorXd& f,
                                const SimulationConfig& config) {
  check_config(config);
  int nb = BatchAccumulator::batches_for(config.T - config.burn_in);
  std::vector<BatchAccumulator> accs(
      config.n_replicas, BatchAccumulator(config.burn_in, config.T, nb));
  run_replicas(config.n_replicas, [&](int r) {
    Philox4x32 rng(config.seed, static_cast<std::uint64_t>(r));
    gillespie(model, pi, config.T, rng, [&](double t0, double t1, int state) {
      accs[r].add_segment(t0, t1, f(state));
    });
  });
  return pooled_estimate(accs);
}

// --- half-line SDE --------------------------------------------------------

namespace {

double inverse_cdf_init(const Diffusion1DModel& model, Philox4x32& rng) {
  // Inverse CDF by linear interpolation of the cumulative grid density.
  VectorXd cum = quadrature::cumulative(model.pi, model.h,
                                        quadrature::Rule::Trapezoid);
  double target = rng.uniform01() * cum(cum.size() - 1);
  int lo = 0, hi = static_cast<int>(cum.size()) - 1;
  while (hi - lo > 1) {
    int mid = (lo + hi) / 2;
    (cum(mid) <= target ? lo : hi) = mid;
  }
  double span = cum(hi) - cum(lo);
  double t = span > 0.0 ? (target - cum(lo)) / span : 0.0;
  return model.x(lo) + t * model.h;
}

template <typename Cb>
void euler_maruyama_halfline(const Diffusion1DModel& model,
                             const SimulationConfig& config, Philox4x32& rng,
                             Cb&& on_step) {
  const double x_max = model.x(model.x.size() - 1);
  double x = inverse_cdf_init(model, rng);
  const long n_steps = static_cast<long>(std::ceil(config.T / config.dt));
  for (long k = 0; k < n_steps; ++k) {
    on_step(k * config.dt, x);
    double drift = model.interp(model.b, x);
    double diff = std::sqrt(2.0 * model.interp(model.a, x) * config.dt);
    x += drift * config.dt + diff * rng.normal();
    x = std::abs(x);  // reflecting boundary at 0
    if (x > x_max)
      throw Error(ErrorKind::Numerical, "StepOutOfRange",
                  "path left the grid at x = " + std::to_string(x) +
                      "; enlarge x_max or shorten T");
  }
}

}  // namespace

SdePath simulate_sde_halfline(const Diffusion1DModel& model,
                              const SimulationConfig& config,
                              std::uint64_t stream) {
  check_config(config);
  if (!(config.dt > 0.0))
    throw Error(ErrorKind::InvalidInput, "BadConfig", "dt must be positive");
  Philox4x32 rng(config.seed, stream);
  SdePath path;
  path.dt = config.dt;
  path.x.reserve(static_cast<std::size_t>(config.T / config.dt) + 1);
  euler_maruyama_halfline(model, config, rng,
                          [&](double, double x) { path.x.push_back(x); });
  return path;
}

AvarEstimate estimate_avar_sde(const SdePath& path,
                               const diffusion1d::ScalarFn& f,
                               const SimulationConfig& config) {
  double T = static_cast<double>(path.x.size()) * path.dt;
  int nb = BatchAccumulator::batches_for(T - config.burn_in);
  BatchAccumulator acc(config.burn_in, T, nb);
  for (std::size_t k = 0; k < path.x.size(); ++k)
    acc.add_segment(k * path.dt, (k + 1) * path.dt, f(path.x[k]));
  return acc.finalize();
}

AvarEstimate estimate_avar_sde(const Diffusion1DModel& model,
                               const diffusion1d::ScalarFn& f,
                               const SimulationConfig& config) {
  check_config(config);
  int nb = BatchAccumulator::batches_for(config.T - config.burn_in);
  std::vector<BatchAccumulator> accs(
      config.n_replicas, BatchAccumulator(config.burn_in, config.T, nb));
  run_replicas(config.n_replicas, [&](int r) {
    Philox4x32 rng(config.seed, static_cast<std::uint64_t>(r));
    euler_maruyama_halfline(model, config, rng, [&](double t, double x) {
      accs[r].add_segment(t, t + config.dt, f(x));
    });
  });
  return pooled_estimate(accs);
}

// --- planar OU with rotation ----------------------------------------------

namespace {

template <typename Cb>
void ou_trajectory(const OuRotationModel& ou, const SimulationConfig& config,
                   OuIntegrator integrator, Philox4x32& rng, Cb&& on_step) {
  if (!(config.dt > 0.0))
    throw Error(ErrorKind::InvalidInput, "BadConfig", "dt must be positive");
  if (integrator == OuIntegrator::EulerMaruyama &&
      config.dt > 1e-2 / (1.0 + ou.c))
    throw Error(ErrorKind::InvalidInput, "BadConfig",
                "Euler step too coarse; need dt <= 1e-2 / (1 + c)");

  Vector2d x(rng.normal(), rng.normal());  // stationary start N(0, I)
  const long n_steps = static_cast<long>(std::ceil(config.T / config.dt));

  if (integrator == OuIntegrator::ExactGaussian) {
    // X_{t+dt} = e^{-dt} R(c dt) X_t + sqrt(1 - e^{-2 dt}) Z, exact in law.
    const double alpha = std::exp(-config.dt);
    const double beta = std::sqrt(1.0 - alpha * alpha);
    const double cth = std::cos(ou.c * config.dt);
    const double sth = std::sin(ou.c * config.dt);
    for (long k = 0; k < n_steps; ++k) {
      on_step(k * config.dt, x);
      double x0 = alpha * (cth * x(0) - sth * x(1)) + beta * rng.normal();
      double x1 = alpha * (sth * x(0) + cth * x(1)) + beta * rng.normal();
      x << x0, x1;
    }
  } else {
    const Eigen::Matrix2d B = ou.B();
    const double diff = std::sqrt(2.0 * config.dt);
    for (long k = 0; k < n_steps; ++k) {
      on_step(k * config.dt, x);
      Vector2d z(rng.normal(), rng.normal());
      x += B * x * config.dt + diff * z;
    }
  }
}

}  // namespace

OuPath simulate_ou_rotation(const OuRotationModel& ou,
                            const SimulationConfig& config,
                            OuIntegrator integrator, std::uint64_t stream) {
  check_config(config);
  Philox4x32 rng(config.seed, stream);
  OuPath path;
  path.dt = config.dt;
  path.x.reserve(static_cast<std::size_t>(config.T / config.dt) + 1);
  ou_trajectory(ou, config, integrator, rng,
                [&](double, const Vector2d& x) { path.x.push_back(x); });
  return path;
}

AvarEstimate estimate_avar_ou(const OuRotationModel& ou, const Vector2d& v,
                              const SimulationConfig& config,
                              OuIntegrator integrator) {
  check_config(config);
  int nb = BatchAccumulator::batches_for(config.T - config.burn_in);
  std::vector<BatchAccumulator> accs(
      config.n_replicas, BatchAccumulator(config.burn_in, config.T, nb));
  run_replicas(config.n_replicas, [&](int r) {
    Philox4x32 rng(config.seed, static_cast<std::uint64_t>(r));
    ou_trajectory(ou, config, integrator, rng,
                  [&](double t, const Vector2d& x) {
                    accs[r].add_segment(t, t + config.dt, v.dot(x));
                  });
  });
  return pooled_estimate(accs);
}

double avar_ou_linear_exact(const OuRotationModel& ou, const Vector2d& v) {
  if (!(v.squaredNorm() > 0.0))
    throw Error(ErrorKind::InvalidInput, "ZeroVariance",
                "direction v must be nonzero");
  Eigen::Matrix2d minusB = -ou.B();
  return 2.0 * v.dot(minusB.inverse() * ou.Sigma() * v);
}

double check_invariance_condition(const OuRotationModel& ou,
                                  const std::vector<Vector2d>& points) {
  // div Z = 0 and <grad U, Z> = c(-x1 x2 + x2 x1) for the rotation field.
  double worst = 0.0;
  for (const auto& p : points) {
    double div_z = 0.0;
    double grad_dot = p(0) * (-ou.c * p(1)) + p(1) * (ou.c * p(0));
    worst = std::max(worst,
                     std::abs((div_z - grad_dot) * std::exp(-ou.U(p))));
  }
  return worst;
}

double invariance_residual(const std::function<Vector2d(const Vector2d&)>& Z,
                           const std::function<double(const Vector2d&)>& divZ,
                           const std::function<Vector2d(const Vector2d&)>& gradU,
                           const std::function<double(const Vector2d&)>& U,
                           const std::vector<Vector2d>& points) {
  double worst = 0.0;
  for (const auto& p : points) {
    double r = (divZ(p) - gradU(p).dot(Z(p))) * std::exp(-U(p));
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

}  // namespace avar::montecarlo
