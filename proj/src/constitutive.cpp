#include "qns/constitutive.hpp"

#include <cmath>
#include <sstream>

namespace qns {

void ModelParams::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model: " + msg); };
  if (!(gamma > 1.0)) fail("gamma must exceed 1");
  if (!(nu > 0.0)) fail("nu must be positive");
  if (!(kappa >= 0.0)) fail("kappa must be nonnegative");
  if (!(r0 >= 0.0)) fail("r0 must be nonnegative");
  if (!(r1 >= 0.0)) fail("r1 must be nonnegative");
  if (!(rho_floor > 0.0 && rho_floor <= 1e-6)) fail("rho_floor must lie in (0, 1e-6]");
}

static void check_time(const SourceTerms& s, double t) {
  if (t < s.t_min || t > s.t_max) {
    std::ostringstream os;
    os << "source sampled at t = " << t << " outside [" << s.t_min << ", " << s.t_max << "]";
    throw std::out_of_range(os.str());
  }
}

Field SourceTerms::f_at(const TorusGrid& g, double t) const {
  check_time(*this, t);
  return f ? f(g, t) : Field::vector(g);
}

Field SourceTerms::M_at(const TorusGrid& g, double t) const {
  check_time(*this, t);
  return M ? M(g, t) : Field::matrix(g);
}

void check_floor(const Field& mu, double rho_floor) {
  for (std::size_t p = 0; p < mu.points(); ++p) {
    const double v = mu(p);
    if (!std::isfinite(v)) throw FloorViolation("non-finite sqrt-density", v, p);
    if (v * v < rho_floor) {
      std::ostringstream os;
      os << "density " << v * v << " below floor " << rho_floor << " at point " << p;
      throw FloorViolation(os.str(), v * v, p);
    }
  }
}

Field velocity(const Field& mu, const Field& m, double rho_floor) {
  check_floor(mu, rho_floor);
  Field u = m;
  for (int c = 0; c < u.components(); ++c) {
    auto uc = u.comp(c);
    for (std::size_t p = 0; p < uc.size(); ++p) uc[p] /= mu(p) * mu(p);
  }
  return u;
}

DensityDerivatives density_derivatives(const DiffOps& ops, const Field& mu, const ModelParams& p) {
  check_floor(mu, p.rho_floor);
  DensityDerivatives d;
  d.grad_sqrt_rho = ops.grad(mu);
  d.hess_sqrt_rho = ops.hessian(mu);
  d.grad_rho_quarter = ops.grad(pointwise_map(mu, [](double v) { return std::sqrt(v); }));
  d.grad_rho_gamma_half = ops.grad(pointwise_map(mu, [g = p.gamma](double v) { return std::pow(v, g); }));
  return d;
}

Field quantum_stress_div_form(const DiffOps& ops, const Field& mu, double kappa, double rho_floor) {
  check_floor(mu, rho_floor);
  if (kappa == 0.0) return Field::matrix(mu.grid());
  const auto [gm, hm] = ops.grad_hessian(mu);
  Field q = pointwise_product(mu, hm) - outer(gm, gm);
  q *= 2.0 * kappa;
  return q;
}

Field bohm_force(const DiffOps& ops, const Field& mu, double kappa, double rho_floor) {
  check_floor(mu, rho_floor);
  if (kappa == 0.0) return Field::vector(mu.grid());
  Field ratio = ops.laplacian(mu);
  for (std::size_t p = 0; p < ratio.points(); ++p) ratio(p) /= mu(p);
  Field rho = pointwise_map(mu, [](double v) { return v * v; });
  Field f = pointwise_product(rho, ops.grad(ratio));
  f *= 2.0 * kappa;
  return f;
}

StressBundle viscous_tensor(const DiffOps& ops, const Field& mu, const Field& u, const ModelParams& p) {
  check_floor(mu, p.rho_floor);
  StressBundle b;
  b.T_nu = pointwise_product(mu, ops.jacobian(u)) * std::sqrt(p.nu);
  b.S_nu = symmetric_part(b.T_nu);
  b.A_nu = antisymmetric_part(b.T_nu);
  b.trace_T_nu = trace(b.T_nu);
  b.S_kappa_div_form = quantum_stress_div_form(ops, mu, p.kappa, p.rho_floor);
  return b;
}

Field viscous_identity_residual(const DiffOps& ops, const Field& mu, const Field& u, const ModelParams& p) {
  const StressBundle b = viscous_tensor(ops, mu, u, p);
  Field lhs = pointwise_product(mu, b.T_nu) * std::sqrt(p.nu);
  const Field rho = pointwise_map(mu, [](double v) { return v * v; });
  Field rhs = ops.jacobian(pointwise_product(rho, u)) * p.nu;
  rhs.axpy(-2.0 * p.nu, pointwise_product(mu, outer(u, ops.grad(mu))));
  return lhs - rhs;
}

Field assemble_force_F(const DiffOps& ops, const Field& mu, const Field& m, const ModelParams& p,
                       const SourceTerms& sources, double t) {
  const Field u = velocity(mu, m, p.rho_floor);
  const Field mug = pointwise_map(mu, [g = p.gamma](double v) { return g == 2.0 ? v * v : std::pow(v, g); });
  Field F = pointwise_product(mug, ops.grad(mug)) * -2.0;
  if (p.r0 != 0.0) F.axpy(-p.r0, u);
  if (p.r1 != 0.0) {
    Field rho_u2 = squared_magnitude(u);
    for (std::size_t q = 0; q < rho_u2.points(); ++q) rho_u2(q) *= mu(q) * mu(q);
    F.axpy(-p.r1, ops.dealias(pointwise_product(rho_u2, u)));
  }
  check_time(sources, t);
  if (sources.has_f()) F += pointwise_product(mu, sources.f_at(mu.grid(), t));
  return F;
}

}  // namespace qns
