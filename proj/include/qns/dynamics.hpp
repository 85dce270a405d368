#pragma once

// Method-of-lines time integration in the (rho = mu^2, m) variables.

#include "qns/constitutive.hpp"

#include <string>
#include <vector>

namespace qns {

struct FlowState {
  double t = 0.0;
  Field mu;
  Field m;

  Field rho() const;
  Field u(double rho_floor) const;
  const TorusGrid& grid() const { return mu.grid(); }
};

struct Tendency {
  Field drho;
  Field dm;
};

enum class Scheme { rk4, ssp_rk3 };
std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct StepConfig {
  Scheme scheme = Scheme::rk4;
  double cfl = 0.25;
  double t_end = 0.1;
  int record_every = 1;
  /// When positive, overrides the CFL step (the last step is shortened to hit t_end).
  double fixed_dt = 0.0;

  void validate() const;
};

struct Trajectory {
  std::vector<FlowState> states;
  std::vector<double> dt_history;
  ModelParams params;
  SourceTerms sources;

  std::vector<double> times() const;
};

/// A stage of a step crossed the floor; carries the offending stage state.
class StageFloorViolation : public FloorViolation {
 public:
  StageFloorViolation(const FloorViolation& base, FlowState stage, int stage_index)
      : FloorViolation(base), stage_(std::move(stage)), stage_index_(stage_index) {}
  const FlowState& stage() const { return stage_; }
  int stage_index() const { return stage_index_; }

 private:
  FlowState stage_;
  int stage_index_;
};

/// Stress 2 nu rho Du + quantum stress + sqrt(kappa) mu M.
Field stress_tensor(const DiffOps& ops, const FlowState& s, const ModelParams& p, const SourceTerms& src);

/// Momentum flux tensor: -m (x) m / rho + 2 nu rho Du + quantum stress + sqrt(kappa) mu M.
Field momentum_flux(const DiffOps& ops, const FlowState& s, const ModelParams& p, const SourceTerms& src);

Tendency rhs(const DiffOps& ops, const FlowState& s, const ModelParams& p, const SourceTerms& src);

/// cfl * min(h / max(|u| + c_s), h^2 / (4 nu), h^2 / (2 sqrt(kappa))).
double cfl_dt(const FlowState& s, const ModelParams& p, double cfl);

FlowState step(const DiffOps& ops, const FlowState& s, double dt, Scheme scheme, const ModelParams& p,
               const SourceTerms& src);

Trajectory evolve(const DiffOps& ops, const FlowState& s0, const ModelParams& p, const SourceTerms& src,
                  const StepConfig& cfg);

// Manufactured traveling wave: rho* = 1 + a sin(2 pi (x - c t)), m*_1 = c rho* + C,
// remaining momentum components zero. Continuity holds exactly; f* closes momentum.
struct ManufacturedSpec {
  double amplitude = 0.2;
  double speed = 1.0;
  double offset = 0.3;
};

FlowState manufactured_state(const TorusGrid& g, const ManufacturedSpec& spec, double t);
/// Body force f* evaluated pointwise by truncated Taylor arithmetic.
Field manufactured_force(const TorusGrid& g, const ManufacturedSpec& spec, const ModelParams& p, double t);
SourceTerms manufactured_sources(const ManufacturedSpec& spec, const ModelParams& p);

struct ManufacturedRun {
  int n = 0;
  double dt = 0.0;
  double err_rho = 0.0;
  double err_m = 0.0;
};

/// Runs the manufactured problem to cfg.t_end for each resolution and
/// reports max-norm errors at the final time.
std::vector<ManufacturedRun> manufactured_study(int dim, const std::vector<int>& resolutions, Backend backend,
                                                const ManufacturedSpec& spec, const ModelParams& p,
                                                const StepConfig& cfg);

/// Least-squares slope of log(y) against log(x).
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qns
