#include "avar/exittime.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "avar/linalg.hpp"

namespace avar::exittime {

namespace {

std::vector<int> checked_omega(int n, const std::vector<int>& omega) {
  std::set<int> unique;
  for (int x : omega) {
    if (x < 0 || x >= n)
      throw Error(ErrorKind::InvalidInput, "BadOmega",
                  "state index " + std::to_string(x) + " out of range");
    unique.insert(x);
  }
  if (unique.empty())
    throw Error(ErrorKind::InvalidInput, "EmptyOmega", "Omega is empty");
  if (static_cast<int>(unique.size()) == n)
    throw Error(ErrorKind::InvalidInput, "FullOmega",
                "Omega must be a proper subset of the state space");
  return {unique.begin(), unique.end()};
}

}  // namespace

double mean_exit_time_exact(const CtmcModel& model,
                            const StationaryDistribution& pi,
                            const std::vector<int>& omega_in) {
  auto omega = checked_omega(model.n(), omega_in);
  const int m = static_cast<int>(omega.size());

  Eigen::MatrixXd Qs(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) Qs(i, j) = model.Q(omega[i], omega[j]);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(-Qs);
  VectorXd h = lu.solve(VectorXd::Ones(m));
  if (!((-Qs * h - VectorXd::Ones(m)).cwiseAbs().maxCoeff() <= 1e-9))
    throw Error(ErrorKind::Numerical, "SingularSolve",
                "Dirichlet sub-generator solve failed");

  double out = 0.0;
  for (int i = 0; i < m; ++i) out += pi.pi(omega[i]) * h(i);
  return out;
}

double variational_exit_time(const CtmcModel& model,
                             const StationaryDistribution& pi,
                             const std::vector<int>& omega_in) {
  auto omega = checked_omega(model.n(), omega_in);
  const int m = static_cast<int>(omega.size());
  chain::FormDecomposition form = chain::dirichlet_form(model, pi);

  Eigen::MatrixXd Ss(m, m);
  VectorXd pis(m);
  for (int i = 0; i < m; ++i) {
    pis(i) = pi.pi(omega[i]);
    for (int j = 0; j < m; ++j) Ss(i, j) = form.S(omega[i], omega[j]);
  }

  // min u^T Ss u subject to pis^T u = 1; Ss is positive definite on the
  // Dirichlet restriction of an irreducible chain.
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + 1, m + 1);
  K.topLeftCorner(m, m) = 2.0 * Ss;
  K.topRightCorner(m, 1) = -pis;
  K.bottomLeftCorner(1, m) = pis.transpose();
  VectorXd rhs = VectorXd::Zero(m + 1);
  rhs(m) = 1.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
  VectorXd sol = lu.solve(rhs);
  if (!((K * sol - rhs).cwiseAbs().maxCoeff() <= 1e-8))
    throw Error(ErrorKind::Numerical, "SingularSolve",
                "exit-time Lagrange system is singular");
  VectorXd u = sol.head(m);
  double inf_value = u.dot(Ss * u);
  if (!(inf_value > 0.0))
    throw Error(ErrorKind::Numerical, "SingularSolve",
                "variational exit-time value is not positive");
  return 1.0 / inf_value;
}

chain::Observable indicator_observable(const StationaryDistribution& pi,
                                       const std::vector<int>& omega_in) {
  const int n = static_cast<int>(pi.pi.size());
  auto omega = checked_omega(n, omega_in);
  double mass = 0.0;
  for (int x : omega) mass += pi.pi(x);

  VectorXd f = VectorXd::Constant(n, -mass / (1.0 - mass));
  for (int x : omega) f(x) = 1.0;
  return chain::Observable{f, true};
}

ExitTimeReport exit_bound_report(const CtmcModel& model,
                                 const StationaryDistribution& pi,
                                 const std::vector<int>& omega_in) {
  auto omega = checked_omega(model.n(), omega_in);

  ExitTimeReport report;
  report.omega = omega;
  report.reversible = chain::is_reversible(model, pi, 1e-8);
  if (!report.reversible) report.flags.push_back("not reversible");

  double mass = 0.0;
  for (int x : omega) mass += pi.pi(x);

  report.exact = mean_exit_time_exact(model, pi, omega);
  chain::Observable f = indicator_observable(pi, omega);
  report.sigma2_half =
      0.5 * chain::asymptotic_variance_exact(model, pi, f.f);
  report.lambda1 = chain::spectral_gap(model, pi).lambda1;
  report.bound_provable = mass / (report.lambda1 * (1.0 - mass));
  report.bound_as_stated = mass / (2.0 * report.lambda1 * (1.0 - mass));

  const double tol = 1e-10 * std::max(1.0, report.exact);
  if (report.exact > report.bound_as_stated + tol)
    report.flags.push_back("as-stated bound violated");
  if (report.exact / report.bound_provable > 0.99)
    report.flags.push_back("provable bound tight");
  return report;
}

}  // namespace avar::exittime
