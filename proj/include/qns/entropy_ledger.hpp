#pragma once

// Energy and BD-entropy functionals, dissipations, budgets and a priori norms.

#include "qns/dynamics.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace qns {

struct Functionals {
  double E = 0.0;
  double E_BD = 0.0;
  double E_0 = 0.0;
  /// Drag-regularized functional with rho^gamma.
  double E_r = 0.0;
  /// Same with rho^gamma / (gamma - 1).
  double E_r_alt = 0.0;
  /// BD entropy with drift 2 nu grad ln rho, the pairing that closes against 2 nu div(rho Du).
  double E_BD_2nu = 0.0;
};

Functionals functionals(const DiffOps& ops, const FlowState& s, const ModelParams& p);
double energy(const DiffOps& ops, const FlowState& s, const ModelParams& p);
double bd_entropy(const DiffOps& ops, const FlowState& s, const ModelParams& p);
double e_r(const DiffOps& ops, const FlowState& s, const ModelParams& p);

struct Dissipations {
  double D_E = 0.0;
  double D_BD = 0.0;
  /// 2 nu int [(4/gamma)|grad rho^{gamma/2}|^2 + kappa rho |hess ln rho|^2 + rho |A u|^2]
  double D_BD_2nu = 0.0;
  double D_E0 = 0.0;
  double D_E_r = 0.0;
  double drag_r0 = 0.0;
  double drag_r1 = 0.0;
};

Dissipations dissipations(const DiffOps& ops, const FlowState& s, const ModelParams& p);

/// Hessian of ln rho: 2 [hess(mu) / mu - grad mu (x) grad mu / rho].
Field hessian_log_rho(const DiffOps& ops, const Field& mu, double rho_floor);

struct LedgerRow {
  double t = 0.0;
  double E = 0.0, E_BD = 0.0, E_0 = 0.0, E_r = 0.0, E_r_alt = 0.0;
  double D_E = 0.0, D_BD = 0.0, D_E0 = 0.0, D_E_r = 0.0;
  double E_BD_2nu = 0.0, D_BD_2nu = 0.0;
  double drag_r0 = 0.0, drag_r1 = 0.0;
  /// int mu f . u
  double work_f = 0.0;
  /// -sqrt(kappa) int mu M : grad u
  double work_M = 0.0;
  /// With c = 2 nu: -2 r1 c int mu |u|^2 u . grad mu + 2 c int f . grad mu - sqrt(kappa) c int mu hess(ln rho) : M
  double bd_work_terms = 0.0;
  /// r0 c int (rho - ln rho), c = 2 nu
  double bd_log_term = 0.0;
};

LedgerRow ledger_row(const DiffOps& ops, const FlowState& s, const ModelParams& p, const SourceTerms& src);
std::vector<LedgerRow> ledger(const DiffOps& ops, const Trajectory& tr);

const std::vector<std::string>& ledger_columns();
void write_ledger_csv(std::ostream& os, const std::vector<LedgerRow>& rows);

/// Time-integrated source norms ||f||_{L1(L2)} and ||M||_{L2(L2)} over the trajectory times.
double source_norm_f(const Trajectory& tr);
double source_norm_M(const Trajectory& tr);
/// E_r(initial) + ||f||_{L1(L2)} + ||M||_{L2(L2)}
double M_r(const DiffOps& ops, const Trajectory& tr);

struct EquivalenceReport {
  double C_energy = 1.0;
  double C_dissipation = 1.0;
  double C_star = 1.0;
  std::size_t states_used = 0;
};

/// Empirical equivalence constants between E_0 and E + E_BD, and between D_E0 and D_E + D_BD.
EquivalenceReport equivalence_check(const DiffOps& ops, const std::vector<FlowState>& states, const ModelParams& p);

struct BudgetTriple {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

struct BudgetReport {
  double t0 = 0.0, t1 = 0.0;
  BudgetTriple energy;
  BudgetTriple bd;
  /// E_BD_2nu(t0) plus the r0 logarithmic term, for relative scales.
  double bd_scale = 0.0;
  double energy_scale = 0.0;
  /// Cumulative one-sided checks at every recorded time.
  bool energy_sign_ok = true;
  bool bd_sign_ok = true;
  /// BD budget is asserted only with symmetric M or nu r1 <= 1/9.
  bool bd_assertable = true;
  double M_r = 0.0;
  double max_E_r = 0.0;
  double int_D_E_r = 0.0;
  bool gronwall_bound_ok = false;
  double dt_max = 0.0;
  double h = 0.0;
  std::vector<LedgerRow> rows;
};

/// Throws std::invalid_argument on an empty window (fewer than two states).
BudgetReport budget(const DiffOps& ops, const Trajectory& tr, double gronwall_slack = 0.01);

struct AprioriEntry {
  std::string name;
  double exponent = 1.0;
  double value = 0.0;
  double ratio_to_M_r = 0.0;
};

/// Space-time L^p norms from the a priori estimate list; cutoff_m selects phi_m.
std::vector<AprioriEntry> apriori_table(const DiffOps& ops, const Trajectory& tr, double cutoff_m = 2.0);

}  // namespace qns
