#ifndef AVAR_EXITTIME_HPP
#define AVAR_EXITTIME_HPP

#include <vector>

#include "avar/chain.hpp"

namespace avar::exittime {

using chain::CtmcModel;
using chain::StationaryDistribution;
using Eigen::VectorXd;

// Everything the exit-time bound produces. bound_as_stated carries the
// 2*lambda1 denominator; bound_provable the lambda1 one implied by the
// inequality chain E_pi tau <= sigma^2/2 <= |f|^2 / lambda1.
struct ExitTimeReport {
  std::vector<int> omega;
  double exact = 0.0;
  double sigma2_half = 0.0;
  double lambda1 = 0.0;
  double bound_provable = 0.0;
  double bound_as_stated = 0.0;
  bool reversible = true;
  std::vector<std::string> flags;
};

// E_pi tau_Omega by the probabilistic definition: Dirichlet sub-generator
// solve -Q_Omega h = 1, then sum pi_x h_x over Omega.
double mean_exit_time_exact(const CtmcModel& model,
                            const StationaryDistribution& pi,
                            const std::vector<int>& omega);

// 1 / inf {E(u,u) : u = 0 off Omega, pi(u) = 1} via a Lagrange solve.
double variational_exit_time(const CtmcModel& model,
                             const StationaryDistribution& pi,
                             const std::vector<int>& omega);

// f = (1_Omega - pi(Omega)) / (1 - pi(Omega)); centered with
// |f|^2_pi = pi(Omega)/pi(Omega^c).
chain::Observable indicator_observable(const StationaryDistribution& pi,
                                       const std::vector<int>& omega);

ExitTimeReport exit_bound_report(const CtmcModel& model,
                                 const StationaryDistribution& pi,
                                 const std::vector<int>& omega);

}  // namespace avar::exittime

#endif
