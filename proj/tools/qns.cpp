// qns: simulate, budget, verify, renorm, sweep and commutator front end.

#include "qns/errors.hpp"
#include "qns/harness_io.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <malloc.h>
#include <iostream>
#include <optional>

using namespace qns;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::optional<fs::path> g_failure_dir;

int fail(const FailureRecord& f) {
  const std::string j = failure_json(f);
  std::cerr << j << '\n';
  if (g_failure_dir) {
    std::error_code ec;
    fs::create_directories(*g_failure_dir, ec);
    std::ofstream(*g_failure_dir / "failure.json") << j << '\n';
  }
  return int(f.code);
}

json budget_json(const BudgetReport& r) {
  auto triple = [](const BudgetTriple& t) { return json{{"lhs", t.lhs}, {"rhs", t.rhs}, {"residual", t.residual}}; };
  return {{"t0", r.t0},
          {"t1", r.t1},
          {"energy", triple(r.energy)},
          {"bd", triple(r.bd)},
          {"energy_scale", r.energy_scale},
          {"bd_scale", r.bd_scale},
          {"energy_sign_ok", r.energy_sign_ok},
          {"bd_sign_ok", r.bd_sign_ok},
          {"bd_assertable", r.bd_assertable},
          {"M_r", r.M_r},
          {"max_E_r", r.max_E_r},
          {"int_D_E_r", r.int_D_E_r},
          {"gronwall_bound_ok", r.gronwall_bound_ok},
          {"dt_max", r.dt_max},
          {"h", r.h}};
}

int cmd_simulate(const std::string& config_path) {
  const RunConfig cfg = load_config(config_path);
  cfg.validate();
  const fs::path dir = resolve_output_dir(cfg);
  g_failure_dir = dir;
  OutputLock lock(dir);
  const Simulation sim = simulate(cfg);
  write_trajectory(dir, cfg, sim.trajectory, sim.ledger);
  std::cout << "wrote " << sim.trajectory.states.size() << " states to " << dir.string() << '\n';
  return 0;
}

int cmd_budget(const std::string& traj) {
  g_failure_dir = traj;
  const LoadedRun run = read_trajectory(traj);
  DiffOps ops(TorusGrid(run.config.grid.dim, run.config.grid.n), run.config.grid.backend);
  const BudgetReport r = budget(ops, run.trajectory);
  std::cout << budget_json(r).dump(2) << '\n';
  if (!r.energy_sign_ok) throw InvariantViolation("energy_dissipation_sign", "cumulative energy budget sign failed");
  if (r.bd_assertable && !r.bd_sign_ok) throw InvariantViolation("bd_dissipation_sign", "cumulative BD sign failed");
  if (!r.gronwall_bound_ok) throw InvariantViolation("gronwall_bound", "E_r or int D_E_r exceeds M_r");
  return 0;
}

int cmd_verify(const std::string& config_path) {
  const RunConfig cfg = load_config(config_path);
  std::string first;
  for (const IdentityCheck& c : verify_identities(cfg)) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " residual=" << c.residual << " tol=" << c.tolerance
              << '\n';
    if (!c.passed && first.empty()) first = c.name;
  }
  if (!first.empty()) throw InvariantViolation(first, "identity residual above tolerance");
  return 0;
}

int cmd_renorm(const std::string& traj, const std::string& phi, bool n_sweep) {
  g_failure_dir = traj;
  const LoadedRun run = read_trajectory(traj);
  const Trajectory& tr = run.trajectory;
  const int d = run.config.grid.dim;
  DiffOps ops(TorusGrid(d, run.config.grid.n), run.config.grid.backend);
  std::vector<RenormFn> scan;
  if (phi == "all") {
    scan = standard_renorm_scan(d);
  } else {
    for (RenormFn& f : standard_renorm_scan(d))
      if (f.name.rfind(phi, 0) == 0) scan.push_back(std::move(f));
    if (scan.empty()) throw ConfigError("renorm: no renormalizer matches '" + phi + "'");
  }
  const DefectScan ds = defect_scan(ops, tr, scan);
  const TestFn psi = test_dictionary(tr.states.front().t, tr.states.back().t, d).front();
  std::cout << "parameter,mass,bound,ratio,residual\n";
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const DefectReport rep = renormalized_residual(ops, tr, scan[i], psi, ds.M_r, ds.C_bar, kInf);
    std::cout << scan[i].name << ',' << rep.R_mass + rep.Rbar_mass << ',' << rep.bound << ',' << ds.rows[i].ratio
              << ',' << rep.weak_residual << '\n';
  }
  std::cout << "# C_bar=" << ds.C_bar << " M_r=" << ds.M_r << " curvature_span=" << ds.curvature_span << '\n';
  if (n_sweep) {
    std::cout << "n,difference\n";
    for (const RecoveryRow& r : recovery_table(ops, tr, psi, {1, 2, 4, 8, 16}))
      std::cout << r.n << ',' << r.difference << '\n';
  }
  return 0;
}

int cmd_sweep(const std::string& plan_path) {
  const RunConfig cfg = load_config(plan_path);
  cfg.validate();
  const fs::path dir = resolve_output_dir(cfg);
  g_failure_dir = dir;
  OutputLock lock(dir);
  SweepPlan plan;
  plan.varying = cfg.sweep.param;
  plan.values = cfg.sweep.values;
  plan.base = cfg.model;
  const TorusGrid g(cfg.grid.dim, cfg.grid.n);
  plan.initial = make_initial(g, cfg.initial, cfg.model);
  plan.sources = make_sources(cfg.sources, cfg.grid.dim);
  plan.backend = cfg.grid.backend;
  plan.step = cfg.step;
  const ConvergenceTable t = run_sweep(plan);
  std::ofstream csv(dir / "convergence.csv");
  write_convergence_csv(csv, t);
  write_convergence_csv(std::cout, t);
  for (const SweepRow& r : t.rows)
    if (r.failed) throw NumericalAbort("sweep member " + std::to_string(r.value) + " failed: " + r.error);
  return 0;
}

int cmd_commutator(const std::string& config_path) {
  const RunConfig cfg = load_config(config_path);
  cfg.validate();
  const TorusGrid g(1, cfg.commutator.n);
  DiffOps ops(g);
  const double C = commutator_kernel_constant(1);
  std::cout << "case,epsilon,norm,ratio\n";
  std::string violated;
  for (const CommutatorCase& cc : commutator_corpus(g)) {
    const CommutatorTable t = commutator_test(ops, cc.g, cc.h, cfg.commutator.p, cfg.commutator.q,
                                              cfg.commutator.epsilons);
    for (const CommutatorRow& r : t.rows) {
      std::cout << cc.name << ',' << r.epsilon << ',' << r.norm << ',' << r.ratio << '\n';
      if (r.ratio > C && violated.empty()) violated = "commutator_uniform_bound";
    }
    if (!t.monotone && violated.empty()) violated = "commutator_monotone_decay";
  }
  if (!violated.empty()) throw InvariantViolation(violated, "commutator corpus check failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // Field temporaries are large; keep freed blocks in the heap instead of returning them to the kernel.
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  CLI::App app{"Quantum Navier-Stokes experiments on the periodic torus"};
  app.require_subcommand(1);
  std::string path, phi = "all";
  bool n_sweep = false;

  auto* sim = app.add_subcommand("simulate", "run a configuration and write a trajectory directory");
  sim->add_option("config", path)->required();
  auto* bud = app.add_subcommand("budget", "energy, BD and Gronwall budgets of a trajectory");
  bud->add_option("trajectory", path)->required();
  auto* ver = app.add_subcommand("verify", "operator and constitutive identity suite");
  ver->add_option("config", path)->required();
  auto* ren = app.add_subcommand("renorm", "defect scan and recovery table of a trajectory");
  ren->add_option("trajectory", path)->required();
  ren->add_option("--phi", phi, "renormalizer name prefix or 'all'");
  ren->add_flag("--n-sweep", n_sweep, "phi_n recovery table over n = 1, 2, 4, 8, 16");
  auto* swp = app.add_subcommand("sweep", "parameter sweep toward the reference value");
  swp->add_option("plan", path)->required();
  auto* com = app.add_subcommand("commutator", "commutator decay over the rough corpus");
  com->add_option("config", path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : int(ExitCode::config);
  }

  try {
    if (*sim) return cmd_simulate(path);
    if (*bud) return cmd_budget(path);
    if (*ver) return cmd_verify(path);
    if (*ren) return cmd_renorm(path, phi, n_sweep);
    if (*swp) return cmd_sweep(path);
    if (*com) return cmd_commutator(path);
  } catch (...) {
    return fail(failure_from_current_exception());
  }
  return 0;
}
