/**
 * @file cli.hpp
 * @brief Command-line front end: lp-infer, qp-infer, simulate, portfolio.
 *
 * Exit codes: 0 success, 1 error, 2 empty confidence set, 64 usage.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpinfer/config.hpp"
#include "mpinfer/errors.hpp"
#include "mpinfer/experiments.hpp"
#include "mpinfer/inference.hpp"
#include "mpinfer/lp.hpp"
#include "mpinfer/portfolio.hpp"
#include "mpinfer/qp.hpp"

namespace mpinfer {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitEmptySet = 2, kExitUsage = 64 };

namespace cli {

struct SampleSolution {
  SolveStatus status = SolveStatus::Infeasible;
  DenseVector theta;
  DenseVector multipliers;
  double objective = 0.0;
};

inline SampleSolution solve_sample(const ProblemConfig& cfg) {
  SampleSolution s;
  if (cfg.kind == ProgramKind::Lp) {
    const LpSolution sol = solve_lp(cfg.lp);
    s.status = sol.status;
    s.theta = sol.theta;
    s.multipliers = cfg.lp.nonneg ? concat(sol.lambda, sol.sign_lambda) : sol.lambda;
    s.objective = sol.objective;
  } else {
    const QpSolution sol = solve_qp(cfg.qp);
    s.status = sol.status;
    s.theta = sol.theta;
    s.multipliers = concat(concat(sol.lambda_ineq, sol.lambda_eq), sol.lambda_sign);
    s.objective = sol.objective;
  }
  return s;
}

inline int run_infer(const std::string& config_path, const std::string& out_dir, std::size_t threads,
                     ProgramKind expected, std::ostream& out, std::ostream& err) {
  const ProblemConfig cfg = load_config(config_path);
  if (cfg.kind != expected)
    throw ConfigError("kind", std::string("this subcommand needs kind = ") + (expected == ProgramKind::Lp ? "lp" : "qp"));
  const KktSystem sys = cfg.system();
  const EstimatedCoefficients est = cfg.estimates();
  const SampleSolution sample = solve_sample(cfg);

  ConfidenceSpec spec = cfg.spec(threads);
  if (!cfg.theta_lower) {
    if (sample.status != SolveStatus::Optimal)
      throw ConfigError("theta_lower", "required when the sample program has no optimal solution");
    default_theta_box(est, sample.theta, spec);
  }
  const ConfidenceSet cs = grid_scan(sys, est, spec);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_text_file(dir / "cs_points.csv", cs_points_csv(cs.points, sys.k));

  nlohmann::ordered_json j;
  j["kind"] = cfg.kind == ProgramKind::Lp ? "lp" : "qp";
  j["status"] = to_string(sample.status);
  if (sample.status == SolveStatus::Optimal) {
    j["theta_hat"] = json_vector(sample.theta);
    j["lambda_hat"] = json_vector(sample.multipliers);
    j["objective"] = round_g10(sample.objective);
  }
  j["df"] = cs.df;
  j["alpha"] = round_g10(cs.alpha);
  j["critical_value"] = round_g10(cs.critical_value);
  j["grid_points"] = cs.points.size();
  j["accepted_points"] = cs.accepted_count();

  int code = kExitOk;
  if (cs.accepted_count() == 0) {
    j["empty"] = true;
    j["min_statistic"] = round_g10(cs.min_statistic());
    err << "empty confidence set: minimum statistic " << format_g10(cs.min_statistic()) << " exceeds critical value "
        << format_g10(cs.critical_value) << "\n";
    code = kExitEmptySet;
  } else {
    nlohmann::ordered_json proj = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < sys.k; ++c) {
      const Interval iv = projection_interval(sys, est, spec, c, cs);
      proj.push_back({round_g10(iv.lower), round_g10(iv.upper)});
      out << "theta_" << (c + 1) << " in [" << format_g10(iv.lower) << ", " << format_g10(iv.upper) << "]\n";
    }
    j["empty"] = false;
    j["projection"] = proj;
  }
  write_text_file(dir / "result.json", j.dump(2) + "\n");
  out << cs.accepted_count() << " of " << cs.points.size() << " grid points accepted (df " << cs.df
      << ", critical value " << format_g10(cs.critical_value) << ")\n";
  return code;
}

struct SimulateArgs {
  std::vector<std::string> designs;
  std::vector<std::size_t> sizes{100};
  std::size_t reps = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 42;
  std::string out;
};

inline int run_simulate(const SimulateArgs& a, std::size_t threads, std::ostream& out) {
  std::vector<SimDesign> designs;
  for (const auto& id : a.designs)
    for (std::size_t n : a.sizes) {
      SimDesign d = make_design(parse_design_id(id), n, a.reps, a.alpha, a.seed);
      d.threads = threads;
      designs.push_back(d);
    }
  const CoverageTable t = coverage_table(designs);
  out << t.to_text();
  if (!a.out.empty()) {
    const std::filesystem::path p(a.out);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    write_text_file(p, t.to_csv());
  }
  return kExitOk;
}

struct PortfolioArgs {
  std::string data;
  bool fixture = false;
  double mu = 0.0;
  bool mu_given = false;
  double alpha = 0.10;
  double grid_step = 0.01;
  double annualize = 1.0;
  std::string out_dir = "results";
  std::string dump_fixture;
  std::string emit_config;
};

inline int run_portfolio(const PortfolioArgs& a, std::size_t threads, std::ostream& out, std::ostream& err) {
  if (!a.dump_fixture.empty()) {
    const std::filesystem::path p(a.dump_fixture);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    write_text_file(p, panel_csv(make_fixture_panel()));
    out << "wrote fixture panel to " << a.dump_fixture << "\n";
    if (a.data.empty() && !a.fixture) return kExitOk;
  }
  if (a.data.empty() == !a.fixture) throw ConfigError("data", "give exactly one of --data or --fixture");
  if (!a.mu_given) throw ConfigError("mu", "required");
  const ReturnPanel panel = a.fixture ? parse_panel(panel_csv(make_fixture_panel())) : ingest_csv(a.data);
  out << "panel: " << panel.observations() << " observations, " << panel.assets() << " assets";
  if (panel.dropped_rows > 0) out << ", " << panel.dropped_rows << " incomplete rows dropped";
  out << "\n";
  const PortfolioInstance inst = estimate_instance(panel, a.mu, a.annualize);
  if (!a.emit_config.empty()) {
    const std::filesystem::path p(a.emit_config);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    write_text_file(p, write_config(portfolio_config(inst, a.alpha, a.grid_step)));
  }
  const QpSolution sol = efficient_weights(inst);
  if (sol.status != SolveStatus::Optimal)
    throw PreconditionError("target return " + format_g10(a.mu) + " is not attainable by a long-only portfolio");
  const ConfidenceSet cs = portfolio_cs(inst, a.alpha, a.grid_step, threads);

  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);
  write_text_file(dir / "cs_points.csv", cs_points_csv(accepted_with_shell(cs), inst.assets()));
  write_text_file(dir / "solution.json", solution_json(inst, sol, a.alpha, cs.critical_value));
  out << "efficient weights:";
  for (std::size_t j = 0; j < inst.assets(); ++j) out << " " << inst.tickers[j] << "=" << format_g10(sol.theta[j]);
  out << "\n" << cs.accepted_count() << " of " << cs.points.size() << " simplex points accepted\n";
  if (cs.accepted_count() == 0) {
    err << "empty confidence set: minimum statistic " << format_g10(cs.min_statistic()) << "\n";
    return kExitEmptySet;
  }
  return kExitOk;
}

}  // namespace cli

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Inference for solutions of linear and quadratic programs with estimated coefficients", "mpinfer"};
  app.set_version_flag("--version", std::string("mpinfer ") + kVersion);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads for grids and replications (0 = all cores)");
  app.require_subcommand(0, 1);

  std::string lp_config, lp_out = "results";
  auto* lp = app.add_subcommand("lp-infer", "Confidence set for an LP solution from a problem config");
  lp->add_option("--config", lp_config, "Problem config file")->required();
  lp->add_option("--out-dir", lp_out, "Output directory");

  std::string qp_config, qp_out = "results";
  auto* qp = app.add_subcommand("qp-infer", "Confidence set for a QP solution from a problem config");
  qp->add_option("--config", qp_config, "Problem config file")->required();
  qp->add_option("--out-dir", qp_out, "Output directory");

  cli::SimulateArgs sim;
  auto* simc = app.add_subcommand("simulate", "Monte Carlo coverage of the simulation designs");
  simc->add_option("--design", sim.designs, "Designs: 1a, 1b, 1c, 2 (comma separated)")->required()->delimiter(',');
  simc->add_option("--n", sim.sizes, "Sample sizes (comma separated)")->delimiter(',');
  simc->add_option("--reps", sim.reps, "Replications per cell");
  simc->add_option("--alpha", sim.alpha, "Nominal level");
  simc->add_option("--seed", sim.seed, "Master seed; replication r uses seed + r");
  simc->add_option("--out", sim.out, "CSV output path");

  cli::PortfolioArgs pf;
  auto* pfc = app.add_subcommand("portfolio", "Confidence set for long-only efficient portfolio weights");
  pfc->add_option("--data", pf.data, "CSV with header date,<ticker>,...");
  pfc->add_flag("--fixture", pf.fixture, "Use the built-in calibrated panel instead of --data");
  auto* mu_opt = pfc->add_option("--mu", pf.mu, "Target return (percent)");
  pfc->add_option("--alpha", pf.alpha, "Nominal level");
  pfc->add_option("--grid-step", pf.grid_step, "Simplex lattice step");
  pfc->add_option("--annualize-factor", pf.annualize, "Multiplier applied to the covariance of daily values");
  pfc->add_option("--out-dir", pf.out_dir, "Output directory");
  pfc->add_option("--dump-fixture", pf.dump_fixture, "Write the built-in panel as CSV");
  pfc->add_option("--emit-config", pf.emit_config, "Write the instance as a qp-infer config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (lp->parsed()) return cli::run_infer(lp_config, lp_out, threads, ProgramKind::Lp, out, err);
    if (qp->parsed()) return cli::run_infer(qp_config, qp_out, threads, ProgramKind::Qp, out, err);
    if (simc->parsed()) return cli::run_simulate(sim, threads, out);
    if (pfc->parsed()) {
      pf.mu_given = mu_opt->count() > 0;
      return cli::run_portfolio(pf, threads, out, err);
    }
  } catch (const EmptySet& e) {
    err << "empty confidence set: " << e.what() << "\n";
    return kExitEmptySet;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  out << app.help();
  return kExitUsage;
}

}  // namespace mpinfer
