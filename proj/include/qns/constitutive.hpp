#pragma once

// Model tensors and forces for the drag-regularized quantum Navier-Stokes system.

#include "qns/errors.hpp"
#include "qns/torus_field.hpp"

#include <functional>

namespace qns {

struct ModelParams {
  double gamma = 2.0;
  double nu = 0.1;
  double kappa = 0.01;
  double r0 = 0.0;
  double r1 = 0.0;
  double rho_floor = 1e-8;

  /// Throws ConfigError when a parameter is out of range.
  void validate() const;
};

/// Time-dependent body force f (vector) and stress source M (matrix).
/// Empty samplers mean identically zero. Sampling outside [t_min, t_max]
/// throws std::out_of_range.
struct SourceTerms {
  std::function<Field(const TorusGrid&, double)> f;
  std::function<Field(const TorusGrid&, double)> M;
  bool symmetric_M = true;
  double t_min = 0.0;
  double t_max = kInf;

  Field f_at(const TorusGrid& g, double t) const;
  Field M_at(const TorusGrid& g, double t) const;
  bool has_f() const { return bool(f); }
  bool has_M() const { return bool(M); }
};

/// Throws FloorViolation if mu^2 < rho_floor or mu is not finite anywhere.
void check_floor(const Field& mu, double rho_floor);

/// u = m / mu^2
Field velocity(const Field& mu, const Field& m, double rho_floor);

struct DensityDerivatives {
  Field grad_sqrt_rho;
  Field hess_sqrt_rho;
  Field grad_rho_quarter;
  Field grad_rho_gamma_half;
};

DensityDerivatives density_derivatives(const DiffOps& ops, const Field& mu, const ModelParams& p);

/// 2 kappa (mu hess(mu) - grad mu (x) grad mu), the tensor whose divergence
/// is the Bohm force.
Field quantum_stress_div_form(const DiffOps& ops, const Field& mu, double kappa, double rho_floor);

/// 2 kappa rho grad(lap(mu) / mu)
Field bohm_force(const DiffOps& ops, const Field& mu, double kappa, double rho_floor);

struct StressBundle {
  Field T_nu;
  Field S_nu;
  Field A_nu;
  Field S_kappa_div_form;
  Field trace_T_nu;
};

/// T_nu = sqrt(nu) mu grad(u); the quantum part uses p.kappa.
StressBundle viscous_tensor(const DiffOps& ops, const Field& mu, const Field& u, const ModelParams& p);

/// Residual sqrt(nu rho) T_nu - [nu grad(rho u) - 2 nu mu u (x) grad mu].
Field viscous_identity_residual(const DiffOps& ops, const Field& mu, const Field& u, const ModelParams& p);

/// F = -2 mu^gamma grad(mu^gamma) - r0 u - r1 rho |u|^2 u + mu f(t)
Field assemble_force_F(const DiffOps& ops, const Field& mu, const Field& m, const ModelParams& p,
                       const SourceTerms& sources, double t);

}  // namespace qns
