#pragma once

// Parameter sweeps toward a reference run and the stability-mode distances between trajectories.

#include "qns/dynamics.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace qns {

enum class SweepParam { kappa, r0, r1, nu };
std::string to_string(SweepParam p);
SweepParam sweep_param_from_string(const std::string& s);

/// h(y) = y^{3/4} below 1, y^{1/2} above 2, quintic Hermite join on [1, 2].
double h_interp(double y);
double h_interp_prime(double y);
double h_interp_second(double y);

/// Distances of one trajectory to a reference sampled at the same times.
struct StabilityNorms {
  // (1) C0(L^p) density, p = 1, 2, 3
  double rho_L1 = 0.0, rho_L2 = 0.0, rho_L3 = 0.0;
  // (2) momentum: sup over the test dictionary and times of |int (m_n - m) psi|, and L^2(L^{5/4})
  double m_weak = 0.0, m_strong = 0.0;
  // (4) sqrt(rho) atan(u) in L^2(L^2)
  double sqrt_rho_phi = 0.0;
  // (5) rho^{1/3} u in L^2(L^2)
  double rho13_u = 0.0;
  // (6) r0^{1/2} u in L^{3/2}(L^{3/2})
  double r0_u = 0.0;
  // (7) grad h(rho) in L^2(L^4)
  double grad_h = 0.0;
};

/// Throws std::invalid_argument when the recorded times or grids differ.
StabilityNorms stability_norms(const DiffOps& ops, const Trajectory& run, const Trajectory& ref);

struct SweepPlan {
  SweepParam varying = SweepParam::kappa;
  /// Non-increasing, non-negative; the last entry is the reference.
  std::vector<double> values;
  ModelParams base;
  FlowState initial;
  SourceTerms sources;
  Backend backend = Backend::spectral;
  StepConfig step;

  void validate() const;
  ModelParams params_for(double value) const;
};

struct SweepRow {
  double value = 0.0;
  bool failed = false;
  std::string error;
  StabilityNorms norms;
  /// log(d_k / d_{k+1}) / log(v_k / v_{k+1}) for the C0(L^2) density distance; NaN where undefined.
  double local_rate = 0.0;
};

struct ConvergenceTable {
  SweepParam varying = SweepParam::kappa;
  double shared_dt = 0.0;
  std::vector<SweepRow> rows;
  /// Least-squares slopes of log distance against log value over non-reference rows.
  double fitted_rate_rho = 0.0;
  double fitted_rate_phi = 0.0;
  /// C0(L^2) density distance non-increasing along the sweep within 5% slack.
  bool monotone = false;
  /// Smallest non-reference distance over the first one.
  double final_over_initial = 0.0;
};

/// Runs every member on a shared time step (the smallest CFL step over the sweep) in parallel.
/// Member failures are recorded in their rows; the table is always returned.
ConvergenceTable run_sweep(const SweepPlan& plan);

const std::vector<std::string>& convergence_columns();
void write_convergence_csv(std::ostream& os, const ConvergenceTable& t);

}  // namespace qns
