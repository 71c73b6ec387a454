// fvc: solve, check and alpha-sweep for fractional Bolza problems.
//
//   fvc solve problem.json [--n-cells N] [--max-iters K] [--out report.json] [--traj-out traj.csv]
//   fvc check problem.json traj.csv [--tol T] [--out report.json]
//   fvc sweep-alpha problem.json --alphas 1,0.75,0.5 [--out sweep.csv]
//
// Exit codes: 0 success, 1 input error, 2 iteration limit, 3 check failed.
// FVC_LOG selects quiet, info (default) or debug logging on stderr.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "fracvar/fracvar.hpp"

namespace {

using namespace fracvar;
using io::json;

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kMaxIters = 2;
constexpr int kCheckFailed = 3;

void setup_logging() {
  auto logger = spdlog::stderr_logger_st("fvc");
  logger->set_pattern("fvc: [%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("FVC_LOG");
  const std::string level = env ? env : "info";
  if (level == "quiet") {
    spdlog::set_level(spdlog::level::off);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("unknown FVC_LOG value '{}', using info", level);
  }
}

ProblemSpec with_cells(const ProblemSpec& spec, std::optional<std::size_t> n_cells) {
  if (!n_cells) return spec;
  try {
    return spec.with_grid(Grid(spec.grid().a(), spec.grid().b(), *n_cells));
  } catch (const DomainError& e) {
    throw InputError(std::string("--n-cells: ") + e.what());
  }
}

int exit_for(const SolveResult& r) { return r.converged ? kOk : kMaxIters; }

struct SolveArgs {
  std::string problem;
  std::optional<std::size_t> n_cells;
  std::optional<int> max_iters;
  std::string out;
  std::string traj_out;
  unsigned seed = 0;
};

int cmd_solve(const SolveArgs& a) {
  io::LoadedProblem lp = io::load_problem(a.problem);
  const ProblemSpec spec = with_cells(lp.spec, a.n_cells);
  if (a.max_iters) lp.config.max_iters = *a.max_iters;
  if (const auto p = lp.config.problems(); !p.empty()) throw InputError("--max-iters: " + p.front());
  spdlog::info("solving {} (alpha={}, beta={}, n_cells={})", a.problem, spec.alpha(), spec.beta(), spec.grid().n_cells());

  const SolveResult r = solve(spec, lp.config);
  for (const StageInfo& s : r.stages) {
    spdlog::debug("stage rho={} eps={} iterations={} grad={} feasibility={} status={}", s.penalty_weight, s.epsilon,
                  s.iterations, s.grad_norm, s.feasibility_distance, solve_status_name(s.status));
  }
  json j = io::to_json(r);
  j["nonexistence"] = io::to_json(nonexistence_diagnostic(spec, r));
  j["seed"] = a.seed;
  if (!a.out.empty()) io::write_text(a.out, j.dump(2) + "\n");
  if (!a.traj_out.empty()) {
    std::ostringstream csv;
    io::write_trajectory_csv(csv, r.traj);
    io::write_text(a.traj_out, csv.str());
  }
  std::cout << "objective " << io::format_double(r.objective) << "\n"
            << "grad_norm " << io::format_double(r.grad_norm) << "\n"
            << "feasibility_distance " << io::format_double(r.feasibility_distance) << "\n"
            << "iterations " << r.iterations << "\n"
            << "status " << solve_status_name(r.status) << "\n";
  if (!r.converged) spdlog::warn("solver stopped without converging ({})", solve_status_name(r.status));
  return exit_for(r);
}

struct CheckArgs {
  std::string problem;
  std::string traj;
  double tol = 1e-3;
  std::string out;
};

int cmd_check(const CheckArgs& a) {
  const io::LoadedProblem lp = io::load_problem(a.problem);
  std::ifstream in(a.traj);
  if (!in) throw InputError("cannot open '" + a.traj + "'");
  const TrajectoryPair traj = io::read_trajectory_csv(in, lp.spec.grid(), lp.spec.dim());

  ResidualReport rep = [&] {
    try {
      return residual_report(lp.spec, traj);
    } catch (const RegularityError& e) {
      throw InputError(e.what());
    }
  }();
  const double feas = detail::feasibility(lp.spec, traj);
  json j = io::to_json(rep);
  j["feasibility_distance"] = io::to_json(feas);
  j["tol"] = a.tol;

  std::vector<std::string> failed;
  if (!(rep.el_residual_sup <= a.tol)) failed.emplace_back("el_residual_sup");
  if (!(rep.transversality_a <= a.tol)) failed.emplace_back("transversality_a");
  if (!(rep.transversality_b <= a.tol)) failed.emplace_back("transversality_b");
  if (!rep.legendre_ok) failed.emplace_back("legendre");
  if (rep.psi_in_cone && !*rep.psi_in_cone) failed.emplace_back("psi_in_cone");
  if (!(feas <= a.tol)) failed.emplace_back("feasibility_distance");
  j["passed"] = failed.empty();
  j["failed"] = failed;
  if (!a.out.empty()) io::write_text(a.out, j.dump(2) + "\n");

  std::cout << "el_residual_sup " << io::format_double(rep.el_residual_sup) << "\n"
            << "transversality_a " << io::format_double(rep.transversality_a) << "\n"
            << "transversality_b " << io::format_double(rep.transversality_b) << "\n"
            << "legendre_ok " << (rep.legendre_ok ? "true" : "false") << "\n";
  if (rep.psi_in_cone) std::cout << "psi_in_cone " << (*rep.psi_in_cone ? "true" : "false") << "\n";
  std::cout << "feasibility_distance " << io::format_double(feas) << "\n"
            << (failed.empty() ? "PASS" : "FAIL") << "\n";
  for (const auto& f : failed) spdlog::info("check failed: {} (tol {})", f, a.tol);
  return failed.empty() ? kOk : kCheckFailed;
}

struct SweepArgs {
  std::string problem;
  std::vector<double> alphas;
  std::optional<std::size_t> n_cells;
  std::optional<int> max_iters;
  std::string out;
};

int cmd_sweep_alpha(const SweepArgs& a) {
  if (a.alphas.empty()) throw InputError("--alphas: need at least one value");
  io::LoadedProblem lp = io::load_problem(a.problem);
  const ProblemSpec base = with_cells(lp.spec, a.n_cells);
  if (a.max_iters) lp.config.max_iters = *a.max_iters;
  if (const auto p = lp.config.problems(); !p.empty()) throw InputError("--max-iters: " + p.front());

  std::vector<ProblemSpec> specs;
  for (double alpha : a.alphas) {
    specs.push_back(base.with_alpha(alpha));
    io::require_valid(specs.back());
  }

  std::ostringstream csv;
  csv << "alpha,objective,grad_norm,transversality_b,nonexistence_flag\n";
  int code = kOk;
  for (const ProblemSpec& spec : specs) {
    const SolveResult r = solve(spec, lp.config);
    const NonexistenceDiagnostic d = nonexistence_diagnostic(spec, r);
    spdlog::info("alpha={} objective={} transversality_b={} flag={}", spec.alpha(), r.objective,
                 r.report.transversality_b, d.flag);
    csv << io::format_double(spec.alpha()) << "," << io::format_double(r.objective) << ","
        << io::format_double(r.grad_norm) << "," << io::format_double(r.report.transversality_b) << ","
        << (d.flag ? 1 : 0) << "\n";
    if (!r.converged) code = kMaxIters;
  }
  if (!a.out.empty()) {
    io::write_text(a.out, csv.str());
  } else {
    std::cout << csv.str();
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Direct solver and optimality checks for fractional Bolza problems"};
  app.require_subcommand(1);

  SolveArgs sa;
  auto* solve_cmd = app.add_subcommand("solve", "Minimize the discretized functional");
  solve_cmd->add_option("problem", sa.problem, "Problem JSON")->required();
  solve_cmd->add_option("--n-cells", sa.n_cells, "Override grid.n_cells");
  solve_cmd->add_option("--max-iters", sa.max_iters, "Iteration limit per penalty stage");
  solve_cmd->add_option("--out", sa.out, "SolveResult JSON");
  solve_cmd->add_option("--traj-out", sa.traj_out, "Trajectory CSV");
  solve_cmd->add_option("--seed", sa.seed, "Seed for randomized diagnostics");

  CheckArgs ca;
  auto* check_cmd = app.add_subcommand("check", "Evaluate optimality residuals of a trajectory");
  check_cmd->add_option("problem", ca.problem, "Problem JSON")->required();
  check_cmd->add_option("trajectory", ca.traj, "Trajectory CSV")->required();
  check_cmd->add_option("--tol", ca.tol, "Residual tolerance")->check(CLI::PositiveNumber);
  check_cmd->add_option("--out", ca.out, "ResidualReport JSON");

  SweepArgs wa;
  auto* sweep_cmd = app.add_subcommand("sweep-alpha", "Solve for several derivative orders");
  sweep_cmd->add_option("problem", wa.problem, "Problem JSON")->required();
  sweep_cmd->add_option("--alphas", wa.alphas, "Orders to solve for")->delimiter(',');
  sweep_cmd->add_option("--n-cells", wa.n_cells, "Override grid.n_cells");
  sweep_cmd->add_option("--max-iters", wa.max_iters, "Iteration limit per penalty stage");
  sweep_cmd->add_option("--out", wa.out, "Sweep CSV (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*solve_cmd) return cmd_solve(sa);
    if (*check_cmd) return cmd_check(ca);
    return cmd_sweep_alpha(wa);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
}
