#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "avar/chain.hpp"
#include "avar/linalg.hpp"
#include "support/random_models.hpp"

using namespace avar;
using avar::testing::RandomChain;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd mat2(double a, double b, double c, double d) {
  MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

bool has_issue(const std::vector<ValidationIssue>& issues,
               const std::string& code, int row = -2) {
  for (const auto& i : issues)
    if (i.code == code && (row == -2 || i.row == row)) return true;
  return false;
}

}  // namespace

TEST_CASE("validate_model accepts the symmetric two-state chain") {
  auto model = chain::validate_model(mat2(-1, 1, 1, -1));
  CHECK(model.n() == 2);
}

TEST_CASE("validate_model rejects an absorbing state as reducible") {
  auto issues = chain::check_model(mat2(-1, 1, 0, 0));
  CHECK(has_issue(issues, "Reducible"));
  CHECK_THROWS_AS(chain::validate_model(mat2(-1, 1, 0, 0)), ValidationError);
}

TEST_CASE("validate_model reports the offending row sum") {
  auto issues = chain::check_model(mat2(-1, 2, 1, -1));
  CHECK(has_issue(issues, "NonzeroRowSum", 0));
}

TEST_CASE("validate_model lists every violation at once") {
  MatrixXd Q(3, 3);
  Q << -1, 2, 0, -0.5, 0.5, 0, 0, 0, 0;
  auto issues = chain::check_model(Q);
  CHECK(has_issue(issues, "NonzeroRowSum"));
  CHECK(has_issue(issues, "NegativeOffDiagonal"));
  CHECK(has_issue(issues, "Reducible"));
}

TEST_CASE("stationary distribution of a two-state chain is (q10, q01)/sum") {
  auto model = chain::validate_model(mat2(-1, 1, 2, -2));
  auto pi = chain::stationary_distribution(model);
  CHECK(pi.pi(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(pi.pi(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("stationary distribution: symmetric chain and forward cycle") {
  auto sym = testing::two_state_symmetric();
  CHECK(sym.pi.pi(0) == doctest::Approx(0.5).epsilon(1e-13));
  auto cyc = testing::three_cycle_forward();
  for (int i = 0; i < 3; ++i)
    CHECK(cyc.pi.pi(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("reversibility: detailed balance detected and refuted") {
  auto sym = testing::two_state_symmetric();
  CHECK(chain::is_reversible(sym.model, sym.pi));
  auto cyc = testing::three_cycle_forward();
  CHECK_FALSE(chain::is_reversible(cyc.model, cyc.pi));
}

TEST_CASE("every birth-death chain is reversible") {
  std::mt19937_64 rng(7101);
  std::uniform_real_distribution<double> rate(0.2, 3.0);
  const int n = 6;
  MatrixXd Q = MatrixXd::Zero(n, n);
  for (int i = 0; i < n - 1; ++i) {
    Q(i, i + 1) = rate(rng);
    Q(i + 1, i) = rate(rng);
  }
  for (int i = 0; i < n; ++i) Q(i, i) = -Q.row(i).sum();
  auto model = chain::validate_model(Q);
  auto pi = chain::stationary_distribution(model);
  CHECK(chain::is_reversible(model, pi, 1e-12));
}

TEST_CASE("dirichlet form: symmetric part reproduces the jump sum") {
  auto sym = testing::two_state_symmetric();
  auto form = chain::dirichlet_form(sym.model, sym.pi);
  VectorXd u(2);
  u << 1, 0;
  // 1/2 sum pi_x q_xy (u_x - u_y)^2 = 1/2 (1/2 * 1 * 1 + 1/2 * 1 * 1)
  CHECK(form.sym(u) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(form(u, u) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("dirichlet form vanishes on constants and is PSD") {
  std::mt19937_64 rng(411);
  for (int rep = 0; rep < 5; ++rep) {
    auto rc = testing::random_nonreversible_chain(7, rng);
    auto form = chain::dirichlet_form(rc.model, rc.pi);
    VectorXd ones = VectorXd::Ones(7);
    CHECK(std::abs(form(ones, ones)) <= 1e-12);
    CHECK(linalg::linf(form.S * ones) <= 1e-12);
    CHECK(((form.S - form.S.transpose()).cwiseAbs().maxCoeff()) == 0.0);
    CHECK(((form.A + form.A.transpose()).cwiseAbs().maxCoeff()) == 0.0);
    std::normal_distribution<double> gauss;
    for (int probe = 0; probe < 1000; ++probe) {
      VectorXd u(7);
      for (int i = 0; i < 7; ++i) u(i) = gauss(rng);
      CHECK(form.sym(u) >= -1e-12);
    }
  }
}

TEST_CASE("three-cycle has a nonzero skew part") {
  auto cyc = testing::three_cycle_forward();
  auto form = chain::dirichlet_form(cyc.model, cyc.pi);
  CHECK(form.A.cwiseAbs().maxCoeff() > 0.05);
}

TEST_CASE("green_solve on the frozen fixtures") {
  auto sym = testing::two_state_symmetric();
  VectorXd f(2);
  f << 1, -1;
  VectorXd u = chain::green_solve(sym.model, sym.pi, f);
  CHECK(u(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(u(1) == doctest::Approx(-0.5).epsilon(1e-12));

  auto cyc = testing::three_cycle_forward();
  VectorXd f3(3);
  f3 << 2, -1, -1;
  VectorXd u3 = chain::green_solve(cyc.model, cyc.pi, f3);
  CHECK(u3(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(u3(1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(u3(2) == doctest::Approx(0.0).epsilon(1e-12));

  VectorXd zero = VectorXd::Zero(2);
  CHECK(linalg::linf(chain::green_solve(sym.model, sym.pi, zero)) == 0.0);
}

TEST_CASE("green_solve rejects uncentered observables") {
  auto sym = testing::two_state_symmetric();
  VectorXd f(2);
  f << 1, 0;
  CHECK_THROWS_WITH_AS(chain::green_solve(sym.model, sym.pi, f),
                       doctest::Contains("pi-mean"), Error);
}

TEST_CASE("green_solve invariants on random chains") {
  std::mt19937_64 rng(90210);
  for (int rep = 0; rep < 25; ++rep) {
    auto rc = testing::random_nonreversible_chain(3 + rep % 8, rng);
    VectorXd f = testing::random_centered_observable(rc.pi.pi, rng);
    VectorXd u = chain::green_solve(rc.model, rc.pi, f);
    CHECK(linalg::linf(rc.model.Q * u + f) <= 1e-9 * linalg::linf(f));
    CHECK(std::abs(rc.pi.pi.dot(u)) <= 1e-10);
  }
}

TEST_CASE("dual generator: reversible fixed point, cycle reversal, invariance") {
  auto sym = testing::two_state_symmetric();
  auto dual = chain::dual_generator(sym.model, sym.pi);
  CHECK((dual.Q - sym.model.Q).cwiseAbs().maxCoeff() <= 1e-14);

  auto cyc = testing::three_cycle_forward();
  auto dual_cyc = chain::dual_generator(cyc.model, cyc.pi);
  CHECK((dual_cyc.Q - cyc.model.Q.transpose()).cwiseAbs().maxCoeff() <= 1e-14);

  std::mt19937_64 rng(5150);
  auto rc = testing::random_nonreversible_chain(6, rng);
  auto dual_rc = chain::dual_generator(rc.model, rc.pi);
  CHECK(linalg::linf(dual_rc.Q.transpose() * rc.pi.pi) <= 1e-12);
  CHECK(chain::check_model(dual_rc.Q).empty());
}

TEST_CASE("resolvent: frozen 2x2 value and large-alpha limit") {
  auto sym = testing::two_state_symmetric();
  VectorXd f(2);
  f << 1, -1;
  VectorXd g1 = chain::resolvent_solve(sym.model, 1.0, f);
  CHECK(g1(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(g1(1) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));

  VectorXd big = chain::resolvent_solve(sym.model, 1e8, f);
  CHECK(linalg::linf(1e8 * big - f) <= 1e-6);
}

TEST_CASE("resolvent converges monotonically to the Green potential") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 10; ++rep) {
    auto rc = testing::random_nonreversible_chain(3 + rep % 6, rng);
    testing::rescale_to_gap(rc, 2.0);
    VectorXd f = testing::random_centered_observable(rc.pi.pi, rng);
    VectorXd gf = chain::green_solve(rc.model, rc.pi, f);
    double prev = std::numeric_limits<double>::infinity();
    for (double alpha : {1.0, 0.1, 0.01, 0.001}) {
      double err = (chain::resolvent_solve(rc.model, alpha, f) - gf).norm();
      CHECK(err <= prev * (1.0 + 1e-12));
      prev = err;
    }
    CHECK(prev <= 1e-3 * gf.norm());
  }
}

TEST_CASE("asymptotic variance: frozen fixtures and zero observable") {
  auto sym = testing::two_state_symmetric();
  VectorXd f(2);
  f << 1, -1;
  CHECK(chain::asymptotic_variance_exact(sym.model, sym.pi, f) ==
        doctest::Approx(1.0).epsilon(1e-12));

  auto cyc = testing::three_cycle_forward();
  VectorXd f3(3);
  f3 << 2, -1, -1;
  CHECK(chain::asymptotic_variance_exact(cyc.model, cyc.pi, f3) ==
        doctest::Approx(2.0).epsilon(1e-12));

  CHECK(chain::asymptotic_variance_exact(sym.model, sym.pi,
                                         VectorXd::Zero(2)) == 0.0);
}

TEST_CASE("duality symmetry of the Green inner product") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    auto rc = testing::random_nonreversible_chain(4 + rep % 7, rng);
    VectorXd f = testing::random_centered_observable(rc.pi.pi, rng);
    VectorXd gf = chain::green_solve(rc.model, rc.pi, f);
    auto dual = chain::dual_generator(rc.model, rc.pi);
    VectorXd gf_star = chain::green_solve(dual, rc.pi, f);
    double lhs = chain::weighted_dot(rc.pi.pi, gf, f);
    double rhs = chain::weighted_dot(rc.pi.pi, gf_star, f);
    CHECK(std::abs(lhs - rhs) <= 1e-10);
  }
}

TEST_CASE("spectral gap: two-state rates sum, complete graph, scaling") {
  auto model = chain::validate_model(mat2(-0.7, 0.7, 1.9, -1.9));
  auto pi = chain::stationary_distribution(model);
  auto report = chain::spectral_gap(model, pi);
  CHECK(report.lambda1 == doctest::Approx(2.6).epsilon(1e-12));
  CHECK(report.reversible);
  CHECK_FALSE(report.symmetrized);
  CHECK(report.ergodicity_constant == 1.0);

  const int n = 5;
  MatrixXd K = MatrixXd::Ones(n, n) - n * MatrixXd::Identity(n, n);
  auto complete = chain::validate_model(K);
  auto pic = chain::stationary_distribution(complete);
  CHECK(chain::spectral_gap(complete, pic).lambda1 ==
        doctest::Approx(n).epsilon(1e-12));

  // Scale covariance: Q -> 2Q doubles lambda1 and halves sigma^2.
  auto sym = testing::two_state_symmetric();
  chain::CtmcModel scaled{2.0 * sym.model.Q, {}};
  auto pis = chain::stationary_distribution(scaled);
  CHECK(chain::spectral_gap(scaled, pis).lambda1 ==
        doctest::Approx(2.0 * chain::spectral_gap(sym.model, sym.pi).lambda1)
            .epsilon(1e-13));
  VectorXd f(2);
  f << 1, -1;
  double s1 = chain::asymptotic_variance_exact(sym.model, sym.pi, f);
  double s2 = chain::asymptotic_variance_exact(scaled, pis, f);
  CHECK(s2 == doctest::Approx(0.5 * s1).epsilon(1e-13));
}

TEST_CASE("non-reversible gap is flagged as symmetrized") {
  auto cyc = testing::three_cycle_forward();
  auto report = chain::spectral_gap(cyc.model, cyc.pi);
  CHECK_FALSE(report.reversible);
  CHECK(report.symmetrized);
  CHECK(report.lambda1 > 0.0);
}

TEST_CASE("sector constant: reversible chains sit at K = 1") {
  std::mt19937_64 rng(8);
  auto rc = testing::random_reversible_chain(6, rng);
  auto report = chain::sector_constant(rc.model, rc.pi);
  CHECK(report.K == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("sector constant of the forward three-cycle is 2/sqrt(3)") {
  auto cyc = testing::three_cycle_forward();
  auto report = chain::sector_constant(cyc.model, cyc.pi);
  CHECK(report.K == doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-10));

  // The returned pair attains the ratio, and no probe exceeds it.
  auto form = chain::dirichlet_form(cyc.model, cyc.pi);
  double attained =
      std::abs(form(report.u_dir, report.v_dir)) /
      std::sqrt(form.sym(report.u_dir) * form.sym(report.v_dir));
  CHECK(attained == doctest::Approx(report.K).epsilon(1e-9));

  std::mt19937_64 rng(99);
  std::normal_distribution<double> gauss;
  for (int probe = 0; probe < 2000; ++probe) {
    VectorXd u(3), v(3);
    for (int i = 0; i < 3; ++i) {
      u(i) = gauss(rng);
      v(i) = gauss(rng);
    }
    double denom = std::sqrt(form.sym(u) * form.sym(v));
    if (denom < 1e-12) continue;
    CHECK(std::abs(form(u, v)) <= report.K * denom * (1.0 + 1e-10));
  }
}

TEST_CASE("sector constant is continuous at the reversible point") {
  std::mt19937_64 rng(123);
  auto rc = testing::random_reversible_chain(5, rng);
  double prev_excess = std::numeric_limits<double>::infinity();
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    auto perturbed = rc;
    std::mt19937_64 cycle_rng(55);
    testing::add_cycle_flow(perturbed.model.Q, perturbed.pi.pi, eps, cycle_rng);
    auto report = chain::sector_constant(perturbed.model, perturbed.pi);
    double excess = report.K - 1.0;
    CHECK(excess >= 0.0);
    CHECK(excess < prev_excess / 10.0);
    prev_excess = excess;
  }
}

TEST_CASE("sector constant reports a degenerate form as unbounded") {
  // Synthetic non-generator input whose symmetric part has a kernel beyond
  // the constants.
  VectorXd pi = VectorXd::Constant(4, 0.25);
  VectorXd z1(4);
  z1 << 0.5, 0.5, -0.5, -0.5;
  MatrixXd S = z1 * z1.transpose();
  chain::CtmcModel model{-4.0 * S, {}};
  chain::StationaryDistribution dist{pi};
  CHECK_THROWS_WITH_AS(chain::sector_constant(model, dist),
                       doctest::Contains("K = inf"), Error);
}

TEST_CASE("reversibility, K = 1, and vanishing skew part coincide") {
  std::mt19937_64 rng(314);
  auto rev = testing::random_reversible_chain(6, rng);
  auto nonrev = testing::random_nonreversible_chain(6, rng);
  for (const auto& rc : {rev, nonrev}) {
    bool reversible = chain::is_reversible(rc.model, rc.pi, 1e-10);
    auto form = chain::dirichlet_form(rc.model, rc.pi);
    double skew = form.A.norm();
    double K = chain::sector_constant(rc.model, rc.pi).K;
    CHECK(reversible == (skew <= 1e-10));
    CHECK(reversible == (std::abs(K - 1.0) <= 1e-8));
  }
}

TEST_CASE("2d discretizer: flat potential on a periodic grid is the simple walk") {
  chain::Grid2D grid{4, 4, 0.5, 0.0, 0.0, true};
  VectorXd V = VectorXd::Zero(grid.size());
  VectorXd a = VectorXd::Ones(grid.size());
  auto dd = chain::from_reversible_diffusion_2d(grid, V, a, a);
  const double want = 1.0 / (0.5 * 0.5);
  for (int i = 0; i < grid.size(); ++i)
    for (int j = 0; j < grid.size(); ++j)
      if (i != j && dd.model.Q(i, j) != 0.0)
        CHECK(dd.model.Q(i, j) == doctest::Approx(want).epsilon(1e-14));
  CHECK(chain::is_reversible(dd.model, dd.pi, 1e-12));
}

TEST_CASE("2d discretizer: halving the coefficient doubles the variance") {
  chain::Grid2D grid{9, 9, 0.25, -1.0, -1.0};
  VectorXd V(grid.size()), a(grid.size());
  for (int ix = 0; ix < grid.nx; ++ix)
    for (int iy = 0; iy < grid.ny; ++iy) {
      int k = grid.index(ix, iy);
      double x = grid.x(ix), y = grid.y(iy);
      V(k) = -0.5 * (x * x + y * y);
      a(k) = 1.0;
    }
  auto full = chain::from_reversible_diffusion_2d(grid, V, a, a);
  auto half = chain::from_reversible_diffusion_2d(grid, V, 0.5 * a, 0.5 * a);

  std::mt19937_64 rng(77);
  VectorXd f = testing::random_centered_observable(full.pi.pi, rng);
  double s_full = chain::asymptotic_variance_exact(full.model, full.pi, f);
  double s_half = chain::asymptotic_variance_exact(half.model, half.pi, f);
  CHECK(s_half == doctest::Approx(2.0 * s_full).epsilon(1e-10));
}

TEST_CASE("2d discretizer: grid refinement is Cauchy within 5 percent") {
  // OU potential, f = first coordinate, shrinking h on a fixed box.
  std::vector<double> sigmas;
  for (double h : {0.4, 0.2, 0.1}) {
    int m = static_cast<int>(std::lround(4.8 / h)) + 1;
    chain::Grid2D grid{m, m, h, -2.4, -2.4};
    VectorXd V(grid.size()), a(grid.size()), f(grid.size());
    for (int ix = 0; ix < m; ++ix)
      for (int iy = 0; iy < m; ++iy) {
        int k = grid.index(ix, iy);
        V(k) = -0.5 * (grid.x(ix) * grid.x(ix) + grid.y(iy) * grid.y(iy));
        a(k) = 1.0;
        f(k) = grid.x(ix);
      }
    auto dd = chain::from_reversible_diffusion_2d(grid, V, a, a);
    VectorXd fc = chain::center(dd.pi.pi, f);
    sigmas.push_back(chain::asymptotic_variance_exact(dd.model, dd.pi, fc));
  }
  double diff01 = std::abs(sigmas[1] - sigmas[0]);
  double diff12 = std::abs(sigmas[2] - sigmas[1]);
  CHECK(diff12 <= 0.05 * std::abs(sigmas[2]));  // Cauchy tail at 5%
  CHECK(diff12 < diff01);                       // and still contracting
}

TEST_CASE("2d discretizer rejects nonpositive coefficients") {
  chain::Grid2D grid{3, 3, 0.5};
  VectorXd V = VectorXd::Zero(9), a = VectorXd::Ones(9);
  VectorXd bad = a;
  bad(4) = 0.0;
  CHECK_THROWS_WITH_AS(chain::from_reversible_diffusion_2d(grid, V, bad, a),
                       doctest::Contains("positive"), Error);
}
