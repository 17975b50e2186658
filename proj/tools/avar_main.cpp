// avar: asymptotic-variance toolbox for ergodic Markov processes.
// Subcommands: chain, diffusion1d, simulate {ctmc,sde,ou}, exittime.

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "avar/chain.hpp"
#include "avar/diffusion1d.hpp"
#include "avar/exittime.hpp"
#include "avar/expr.hpp"
#include "avar/linalg.hpp"
#include "avar/model_io.hpp"
#include "avar/montecarlo.hpp"
#include "avar/varform.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using avar::io::ordered_json;
using Clock = std::chrono::steady_clock;

struct OutputOptions {
  std::string format = "json";
  std::string out_path;
};

void add_output_flags(CLI::App* cmd, OutputOptions* out) {
  cmd->add_option("--format", out->format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  cmd->add_option("--out", out->out_path, "Write the report to this file");
}

void emit(const ordered_json& report, const OutputOptions& opts) {
  std::string body = opts.format == "csv" ? avar::io::to_flat_csv(report)
                                          : report.dump(2) + "\n";
  if (opts.out_path.empty()) {
    std::cout << body;
  } else {
    std::ofstream out(opts.out_path);
    if (!out)
      throw avar::Error(avar::ErrorKind::InvalidInput, "FileNotFound",
                        "cannot write '" + opts.out_path + "'");
    out << body;
  }
}

ordered_json make_manifest(const std::string& subcommand,
                           const ordered_json& inputs,
                           const ordered_json& options, Clock::time_point t0) {
  ordered_json manifest;
  manifest["tool"] = "avar";
  manifest["version"] = kVersion;
  manifest["subcommand"] = subcommand;
  manifest["inputs"] = inputs;
  manifest["options"] = options;
  manifest["wall_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0)
          .count();
  return manifest;
}

Eigen::VectorXd resolve_observable(const avar::io::ChainModelFile& file,
                                   const std::string& f_flag) {
  if (!f_flag.empty()) return avar::io::parse_inline_vector(f_flag);
  if (file.f) return *file.f;
  throw avar::Error(avar::ErrorKind::InvalidInput, "MissingObservable",
                    "provide --f or an 'f' array in the model file");
}

std::vector<int> resolve_omega(const avar::chain::CtmcModel& model,
                               const std::string& omega_flag) {
  std::vector<int> omega;
  std::stringstream ss(omega_flag);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      int idx = std::stoi(tok, &used);
      if (used == tok.size()) {
        omega.push_back(idx);
        continue;
      }
    } catch (const std::exception&) {
      // fall through to label lookup
    }
    auto it = std::find(model.labels.begin(), model.labels.end(), tok);
    if (it == model.labels.end())
      throw avar::Error(avar::ErrorKind::InvalidInput, "BadOmega",
                        "unknown state '" + tok + "'");
    omega.push_back(static_cast<int>(it - model.labels.begin()));
  }
  return omega;
}

// ---- chain ----------------------------------------------------------------

struct ChainArgs {
  std::string model_path;
  std::string f_flag;
  int probes = 0;
  std::uint64_t seed = 0;
  OutputOptions out;
};

int run_chain(const ChainArgs& args) {
  auto t0 = Clock::now();
  auto file = avar::io::load_chain_model(args.model_path);
  const auto& model = file.model;
  auto pi = avar::chain::stationary_distribution(model);
  Eigen::VectorXd f =
      avar::chain::center(pi.pi, resolve_observable(file, args.f_flag));

  Eigen::VectorXd gf = avar::chain::green_solve(model, pi, f);
  double sigma2 = 2.0 * avar::chain::weighted_dot(pi.pi, gf, f);
  double green_residual =
      avar::linalg::linf(model.Q * gf + f) /
      std::max(1.0, avar::linalg::linf(f));

  auto dual = avar::chain::dual_generator(model, pi);
  Eigen::VectorXd gf_star = avar::chain::green_solve(dual, pi, f);
  double duality_residual =
      std::abs(avar::chain::weighted_dot(pi.pi, gf, f) -
               avar::chain::weighted_dot(pi.pi, gf_star, f));

  auto spectral = avar::chain::spectral_gap(model, pi);
  auto sector = avar::chain::sector_constant(model, pi);
  double minmax_saddle = avar::varform::minmax_value(
      model, pi, f, avar::varform::MinmaxMethod::Saddle);
  double minmax_optimize = avar::varform::minmax_value(
      model, pi, f, avar::varform::MinmaxMethod::Optimize);

  ordered_json results;
  results["n"] = model.n();
  results["reversible"] = spectral.reversible;
  results["sigma2"] = sigma2;
  results["minmax_saddle"] = minmax_saddle;
  results["minmax_optimize"] = minmax_optimize;
  results["sector_K"] = sector.K;
  results["lambda1"] = spectral.lambda1;
  results["ergodicity_constant"] = spectral.ergodicity_constant;
  results["lambda1_symmetrized"] = spectral.symmetrized;
  results["green_residual"] = green_residual;
  results["duality_residual"] = duality_residual;

  ordered_json report;
  ordered_json options{{"f", args.f_flag.empty() ? "model" : args.f_flag},
                       {"probes", args.probes},
                       {"seed", args.seed},
                       {"format", args.out.format}};
  report["results"] = results;
  if (args.probes > 0) {
    auto verification =
        avar::varform::verify_saddle(model, pi, f, args.probes, args.seed);
    report["verification"] = {
        {"value_saddle", verification.value_saddle},
        {"value_optimize", verification.value_optimize},
        {"sigma2", verification.sigma2},
        {"max_saddle_violation", verification.max_saddle_violation},
        {"probes", verification.probes}};
  }
  report["manifest"] = make_manifest(
      "chain", {{"model", args.model_path}}, options, t0);
  emit(report, args.out);
  return 0;
}

// ---- diffusion1d ----------------------------------------------------------

struct DiffusionArgs {
  std::string spec_path;
  std::string f_text = "x-1";
  std::string compare_path;
  double tail_tol = 1e-8;
  std::string rule = "simpson";
  OutputOptions out;
};

avar::diffusion1d::QuadratureConfig quad_config(const DiffusionArgs& args) {
  avar::diffusion1d::QuadratureConfig quad;
  quad.tail_tol = args.tail_tol;
  quad.rule = args.rule == "trapezoid" ? avar::quadrature::Rule::Trapezoid
                                       : avar::quadrature::Rule::Simpson;
  return quad;
}

avar::diffusion1d::Diffusion1DModel build_from_spec(
    const avar::io::DiffusionSpec& spec, const DiffusionArgs& args) {
  return avar::diffusion1d::build_model(spec.a, spec.pi, spec.x0, spec.grid,
                                        quad_config(args));
}

int run_diffusion(const DiffusionArgs& args) {
  auto t0 = Clock::now();
  auto spec = avar::io::load_diffusion_spec(args.spec_path);
  auto model = build_from_spec(spec, args);
  auto f_expr = avar::expr::Expression::parse(args.f_text);
  avar::diffusion1d::ScalarFn f = [&](double x) { return f_expr(x); };

  auto quad = avar::diffusion1d::avar_quadrature(model, f);
  auto poisson = avar::diffusion1d::poisson_solution(model, f);
  Eigen::VectorXd f_samples(model.x.size());
  for (int i = 0; i < model.x.size(); ++i) f_samples(i) = f(model.x(i));
  Eigen::VectorXd fc = f_samples.array() - poisson.recenter_shift;
  double sigma2_poisson =
      2.0 * avar::diffusion1d::pi_inner(model, poisson.u, fc);
  double cross = std::abs(quad.sigma2 - sigma2_poisson) /
                 std::max(1e-300, std::abs(quad.sigma2));
  double residual = avar::diffusion1d::poisson_residual(model, poisson,
                                                        f_samples);

  // Pointwise check of pi a = e^c pi(x0) a(x0).
  double consistency = 0.0;
  double ref = model.pi(model.i0) * model.a(model.i0);
  for (int i = 0; i < model.x.size(); ++i) {
    double lhs = model.pi(i) * model.a(i);
    consistency = std::max(
        consistency, std::abs(lhs - std::exp(model.c(i)) * ref) / lhs);
  }

  auto diag = avar::diffusion1d::check_nonexplosive(model);
  auto deltas = avar::diffusion1d::refinement_deltas(
      spec.a, spec.pi, spec.x0, spec.grid, quad_config(args), f);

  ordered_json results;
  results["sigma2_quadrature"] = quad.sigma2;
  results["refinement_delta"] = deltas.back();
  results["sigma2_poisson"] = sigma2_poisson;
  results["cross_residual"] = cross;
  results["poisson_residual"] = residual;
  results["consistency_residual"] = consistency;
  results["recenter_shift"] = quad.recenter_shift;
  results["tail_mass"] = model.tail_mass;
  results["inner_tail_bound"] = quad.inner_tail_bound;
  results["x0"] = model.x0;
  results["nonexplosive"] = {
      {"partial_integral", diag.partial_integral},
      {"growth_ratio", diag.growth_ratio},
      {"verdict",
       diag.verdict ==
               avar::diffusion1d::NonExplosionDiagnostic::Verdict::Diverging
           ? "diverging"
           : "inconclusive"}};

  ordered_json report;
  ordered_json inputs{{"model", args.spec_path}};
  if (!args.compare_path.empty()) {
    auto spec1 = avar::io::load_diffusion_spec(args.compare_path);
    auto model1 = build_from_spec(spec1, args);
    auto cmp = avar::diffusion1d::compare_coefficients(model, model1, f);
    results["compare"] = {{"sigma2_a", cmp.sigma2_a},
                          {"sigma2_a1", cmp.sigma2_a1},
                          {"verdict", cmp.confirmed ? "confirmed" : "violated"}};
    inputs["compare"] = args.compare_path;
  }
  report["results"] = results;
  report["manifest"] = make_manifest(
      "diffusion1d", inputs,
      {{"f", args.f_text},
       {"tail_tol", args.tail_tol},
       {"rule", args.rule},
       {"format", args.out.format}},
      t0);
  emit(report, args.out);
  return 0;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string kind;  // ctmc | sde | ou
  std::string model_path;
  std::string f_flag;
  std::string v_flag = "1,0";
  double c = 0.0;
  std::string integrator = "exact";
  avar::montecarlo::SimulationConfig config;
  OutputOptions out;
};

int run_simulate(const SimulateArgs& args) {
  auto t0 = Clock::now();
  avar::montecarlo::AvarEstimate est;
  std::string model_id, f_id;

  if (args.kind == "ctmc") {
    auto file = avar::io::load_chain_model(args.model_path);
    auto pi = avar::chain::stationary_distribution(file.model);
    Eigen::VectorXd f =
        avar::chain::center(pi.pi, resolve_observable(file, args.f_flag));
    est = avar::montecarlo::estimate_avar_ctmc(file.model, pi, f, args.config);
    model_id = args.model_path;
    f_id = args.f_flag.empty() ? "model" : args.f_flag;
  } else if (args.kind == "sde") {
    auto spec = avar::io::load_diffusion_spec(args.model_path);
    auto model = avar::diffusion1d::build_model(spec.a, spec.pi, spec.x0,
                                                spec.grid);
    auto f_expr = avar::expr::Expression::parse(
        args.f_flag.empty() ? "x-1" : args.f_flag);
    est = avar::montecarlo::estimate_avar_sde(
        model, [&](double x) { return f_expr(x); }, args.config);
    model_id = args.model_path;
    f_id = f_expr.text();
  } else {
    avar::montecarlo::OuRotationModel ou{args.c};
    Eigen::VectorXd v = avar::io::parse_inline_vector(args.v_flag);
    if (v.size() != 2)
      throw avar::Error(avar::ErrorKind::InvalidInput, "BadVector",
                        "--v needs two components");
    auto integrator = args.integrator == "euler"
                          ? avar::montecarlo::OuIntegrator::EulerMaruyama
                          : avar::montecarlo::OuIntegrator::ExactGaussian;
    est = avar::montecarlo::estimate_avar_ou(ou, {v(0), v(1)}, args.config,
                                             integrator);
    model_id = "ou(c=" + std::to_string(args.c) + ")";
    f_id = "v=" + args.v_flag;
  }

  if (args.out.format == "csv") {
    std::ostringstream csv;
    csv << "model_id,f_id,seed,T,dt,sigma2_hat,stderr,n_batches\n"
        << model_id << "," << f_id << "," << args.config.seed << ","
        << args.config.T << "," << args.config.dt << ","
        << std::setprecision(17) << est.sigma2_hat << "," << est.stderr_
        << "," << est.n_batches << "\n";
    if (args.out.out_path.empty()) {
      std::cout << csv.str();
    } else {
      std::ofstream out(args.out.out_path);
      out << csv.str();
    }
    return 0;
  }

  ordered_json report;
  report["results"] = {{"model_id", model_id},
                       {"f_id", f_id},
                       {"sigma2_hat", est.sigma2_hat},
                       {"stderr", est.stderr_},
                       {"n_batches", est.n_batches},
                       {"effective_T", est.effective_T}};
  report["manifest"] = make_manifest(
      "simulate:" + args.kind,
      {{"model", model_id}},
      {{"f", f_id},
       {"seed", args.config.seed},
       {"T", args.config.T},
       {"dt", args.config.dt},
       {"burn_in", args.config.burn_in},
       {"replicas", args.config.n_replicas},
       {"integrator", args.integrator},
       {"format", args.out.format}},
      t0);
  emit(report, args.out);
  return 0;
}

// ---- exittime ---------------------------------------------------------------

struct ExitArgs {
  std::string model_path;
  std::string omega_flag;
  bool strict = false;
  OutputOptions out;
};

int run_exittime(const ExitArgs& args) {
  auto t0 = Clock::now();
  auto file = avar::io::load_chain_model(args.model_path);
  auto pi = avar::chain::stationary_distribution(file.model);
  auto omega = resolve_omega(file.model, args.omega_flag);

  auto report = avar::exittime::exit_bound_report(file.model, pi, omega);
  if (args.strict && !report.reversible)
    throw avar::Error(avar::ErrorKind::InvalidInput, "NotReversible",
                      "exit-time bound requires a reversible model");
  double variational =
      avar::exittime::variational_exit_time(file.model, pi, omega);

  ordered_json results;
  results["omega"] = report.omega;
  results["exact"] = report.exact;
  results["variational"] = variational;
  results["variational_gap"] =
      std::abs(variational - report.exact) / std::max(1e-300, report.exact);
  results["sigma2_half"] = report.sigma2_half;
  results["lambda1"] = report.lambda1;
  results["bound_provable"] = report.bound_provable;
  results["bound_as_stated"] = report.bound_as_stated;
  results["reversible"] = report.reversible;
  results["flags"] = report.flags;

  ordered_json out;
  out["results"] = results;
  out["manifest"] = make_manifest(
      "exittime", {{"model", args.model_path}},
      {{"omega", args.omega_flag},
       {"strict", args.strict},
       {"format", args.out.format}},
      t0);
  emit(out, args.out);
  return 0;
}

int exit_code_for(const avar::Error& e) {
  switch (e.kind()) {
    case avar::ErrorKind::InvalidInput: return 2;
    case avar::ErrorKind::Statistical: return 3;
    case avar::ErrorKind::Numerical: return 4;
  }
  return 1;
}

void print_error(const avar::Error& e) {
  ordered_json diag;
  diag["error"] = {{"code", e.code()}, {"message", e.what()}};
  if (const auto* v = dynamic_cast<const avar::ValidationError*>(&e)) {
    ordered_json issues = ordered_json::array();
    for (const auto& issue : v->issues())
      issues.push_back({{"code", issue.code},
                        {"row", issue.row},
                        {"col", issue.col},
                        {"value", issue.value},
                        {"message", issue.message}});
    diag["error"]["issues"] = issues;
  }
  std::cerr << diag.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asymptotic variance of ergodic Markov processes"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  ChainArgs chain_args;
  auto* chain_cmd = app.add_subcommand(
      "chain", "Exact variance, min-max value, sector constant, gap");
  chain_cmd->add_option("--model", chain_args.model_path, "Model JSON")
      ->required();
  chain_cmd->add_option("--f", chain_args.f_flag,
                        "Observable as comma-separated values");
  chain_cmd->add_option("--probes", chain_args.probes,
                        "Saddle-inequality probes to run");
  chain_cmd->add_option("--seed", chain_args.seed, "Probe RNG seed");
  add_output_flags(chain_cmd, &chain_args.out);

  DiffusionArgs diff_args;
  auto* diff_cmd = app.add_subcommand(
      "diffusion1d", "Half-line diffusion variance by quadrature");
  diff_cmd->add_option("--model", diff_args.spec_path, "Spec JSON")->required();
  diff_cmd->add_option("--f", diff_args.f_text, "Observable expression in x")
      ->capture_default_str();
  diff_cmd->add_option("--compare", diff_args.compare_path,
                       "Second spec with a >= a1");
  diff_cmd->add_option("--tail-tol", diff_args.tail_tol,
                       "Allowed mass beyond x_max")->capture_default_str();
  diff_cmd->add_option("--rule", diff_args.rule, "Quadrature rule")
      ->check(CLI::IsMember({"simpson", "trapezoid"}))
      ->capture_default_str();
  add_output_flags(diff_cmd, &diff_args.out);

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate",
                                     "Trajectory estimates of the variance");
  sim_cmd->require_subcommand(1);
  auto add_common_sim = [&](CLI::App* cmd, bool needs_dt) {
    cmd->add_option("--seed", sim_args.config.seed, "RNG seed")->required();
    cmd->add_option("--T", sim_args.config.T, "Time horizon per replica")
        ->required();
    if (needs_dt)
      cmd->add_option("--dt", sim_args.config.dt, "Integrator step")
          ->capture_default_str();
    cmd->add_option("--burn-in", sim_args.config.burn_in, "Discarded prefix")
        ->capture_default_str();
    cmd->add_option("--replicas", sim_args.config.n_replicas,
                    "Independent replicas")->capture_default_str();
    add_output_flags(cmd, &sim_args.out);
  };
  auto* sim_ctmc = sim_cmd->add_subcommand("ctmc", "Gillespie on a chain");
  sim_ctmc->add_option("--model", sim_args.model_path, "Model JSON")
      ->required();
  sim_ctmc->add_option("--f", sim_args.f_flag, "Observable values");
  add_common_sim(sim_ctmc, false);
  auto* sim_sde = sim_cmd->add_subcommand("sde", "Reflected Euler-Maruyama");
  sim_sde->add_option("--model", sim_args.model_path, "Diffusion spec JSON")
      ->required();
  sim_sde->add_option("--f", sim_args.f_flag, "Observable expression");
  add_common_sim(sim_sde, true);
  auto* sim_ou = sim_cmd->add_subcommand("ou", "Planar OU with rotation");
  sim_ou->add_option("--c", sim_args.c, "Rotation strength")
      ->capture_default_str();
  sim_ou->add_option("--v", sim_args.v_flag, "Linear observable direction")
      ->capture_default_str();
  sim_ou->add_option("--integrator", sim_args.integrator,
                     "exact (Gaussian transition) or euler")
      ->check(CLI::IsMember({"exact", "euler"}))
      ->capture_default_str();
  add_common_sim(sim_ou, true);

  ExitArgs exit_args;
  auto* exit_cmd = app.add_subcommand("exittime",
                                      "Mean exit time and its bounds");
  exit_cmd->add_option("--model", exit_args.model_path, "Model JSON")
      ->required();
  exit_cmd->add_option("--omega", exit_args.omega_flag,
                       "States of Omega (indices or labels)")->required();
  exit_cmd->add_flag("--strict", exit_args.strict,
                     "Fail on non-reversible models");
  add_output_flags(exit_cmd, &exit_args.out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (chain_cmd->parsed()) return run_chain(chain_args);
    if (diff_cmd->parsed()) return run_diffusion(diff_args);
    if (sim_cmd->parsed()) {
      sim_args.kind = sim_ctmc->parsed() ? "ctmc"
                      : sim_sde->parsed() ? "sde"
                                          : "ou";
      return run_simulate(sim_args);
    }
    if (exit_cmd->parsed()) return run_exittime(exit_args);
  } catch (const avar::Error& e) {
    print_error(e);
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "{\"error\":{\"code\":\"Internal\",\"message\":\""
              << e.what() << "\"}}\n";
    return 1;
  }
  return 0;
}
