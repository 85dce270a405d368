#include "qns/entropy_ledger.hpp"

#include "qns/renormalization.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace qns {

namespace {

struct Pieces {
  Field rho, u, gmu, hmu;
  Field kinetic;  // rho |u|^2
  Field grad_sq;  // |grad mu|^2
  Field rho_gamma;
  Field log_term;  // rho - ln rho
};

Pieces pieces(const DiffOps& ops, const FlowState& s, const ModelParams& p) {
  check_floor(s.mu, p.rho_floor);
  Pieces pc;
  pc.rho = s.rho();
  pc.u = s.u(p.rho_floor);
  pc.gmu = ops.grad(s.mu);
  pc.kinetic = pointwise_product(pc.rho, squared_magnitude(pc.u));
  pc.grad_sq = squared_magnitude(pc.gmu);
  pc.rho_gamma = pointwise_map(pc.rho, [g = p.gamma](double r) { return std::pow(r, g); });
  pc.log_term = pointwise_map(pc.rho, [](double r) { return r - std::log(r); });
  return pc;
}

}  // namespace

Functionals functionals(const DiffOps& ops, const FlowState& s, const ModelParams& p) {
  const Pieces pc = pieces(ops, s, p);
  const double kin = 0.5 * integrate(pc.kinetic);
  const double grad2 = integrate(pc.grad_sq);
  const double press = integrate(pc.rho_gamma);
  // v = u + c grad ln rho, grad ln rho = 2 grad mu / mu
  auto kin_drift = [&](double c) {
    Field v = pc.u;
    for (int k = 0; k < v.components(); ++k)
      for (std::size_t q = 0; q < v.points(); ++q) v(q, k) += 2.0 * c * pc.gmu(q, k) / s.mu(q);
    return 0.5 * integrate(pointwise_product(pc.rho, squared_magnitude(v)));
  };
  const double logt = integrate(pc.log_term);
  Functionals f;
  f.E = kin + press / (p.gamma - 1.0) + 2.0 * p.kappa * grad2;
  f.E_BD = kin_drift(p.nu) + press / (p.gamma - 1.0) + 2.0 * p.kappa * grad2;
  f.E_BD_2nu = kin_drift(2.0 * p.nu) + press / (p.gamma - 1.0) + 2.0 * p.kappa * grad2;
  f.E_0 = kin + (2.0 * p.kappa + 4.0 * p.nu * p.nu) * grad2 + press;
  f.E_r = f.E_0 + p.r0 * logt;
  f.E_r_alt = kin + (2.0 * p.kappa + 4.0 * p.nu * p.nu) * grad2 + press / (p.gamma - 1.0) + p.r0 * logt;
  return f;
}

double energy(const DiffOps& ops, const FlowState& s, const ModelParams& p) { return functionals(ops, s, p).E; }
double bd_entropy(const DiffOps& ops, const FlowState& s, const ModelParams& p) {
  return functionals(ops, s, p).E_BD;
}
double e_r(const DiffOps& ops, const FlowState& s, const ModelParams& p) { return functionals(ops, s, p).E_r; }

Field hessian_log_rho(const DiffOps& ops, const Field& mu, double rho_floor) {
  check_floor(mu, rho_floor);
  const Field gmu = ops.grad(mu);
  Field h = ops.hessian(mu);
  const Field gg = outer(gmu, gmu);
  for (int c = 0; c < h.components(); ++c)
    for (std::size_t q = 0; q < h.points(); ++q) {
      const double m = mu(q);
      h(q, c) = 2.0 * (h(q, c) / m - gg(q, c) / (m * m));
    }
  return h;
}

Dissipations dissipations(const DiffOps& ops, const FlowState& s, const ModelParams& p) {
  const Pieces pc = pieces(ops, s, p);
  const StressBundle b = viscous_tensor(ops, s.mu, pc.u, p);
  const Field mug = pointwise_map(s.mu, [g = p.gamma](double v) { return std::pow(v, g); });
  const double grad_press = integrate(squared_magnitude(ops.grad(mug)));
  Dissipations d;
  d.D_E = 2.0 * integrate(squared_magnitude(b.S_nu));
  double quantum_bd = 0.0, quantum_e0 = 0.0;
  if (p.kappa > 0.0) {
    quantum_bd = integrate(pointwise_product(pc.rho, squared_magnitude(hessian_log_rho(ops, s.mu, p.rho_floor))));
    const Field gq = ops.grad(pointwise_map(s.mu, [](double v) { return std::sqrt(v); }));
    const Field gq2 = squared_magnitude(gq);
    quantum_e0 = integrate(pointwise_product(gq2, gq2)) + integrate(squared_magnitude(ops.hessian(s.mu)));
  }
  // nu * 2 rho |A u|^2 = 2 |A_nu|^2
  const double rot = 2.0 * integrate(squared_magnitude(b.A_nu));
  d.D_BD = p.nu * (4.0 / p.gamma) * grad_press + p.nu * p.kappa * quantum_bd + rot;
  d.D_BD_2nu = 2.0 * p.nu * (4.0 / p.gamma) * grad_press + 2.0 * p.nu * p.kappa * quantum_bd + rot;
  d.D_E0 = p.nu * grad_press + p.nu * p.kappa * quantum_e0 + integrate(squared_magnitude(b.T_nu));
  const Field u2 = squared_magnitude(pc.u);
  d.drag_r0 = p.r0 * integrate(u2);
  d.drag_r1 = p.r1 * integrate(pointwise_product(pc.rho, pointwise_product(u2, u2)));
  d.D_E_r = d.D_E0 + d.drag_r0 + d.drag_r1;
  return d;
}

LedgerRow ledger_row(const DiffOps& ops, const FlowState& s, const ModelParams& p, const SourceTerms& src) {
  const Functionals f = functionals(ops, s, p);
  const Dissipations d = dissipations(ops, s, p);
  LedgerRow r;
  r.t = s.t;
  r.E = f.E;
  r.E_BD = f.E_BD;
  r.E_0 = f.E_0;
  r.E_r = f.E_r;
  r.E_r_alt = f.E_r_alt;
  r.E_BD_2nu = f.E_BD_2nu;
  r.D_BD_2nu = d.D_BD_2nu;
  r.D_E = d.D_E;
  r.D_BD = d.D_BD;
  r.D_E0 = d.D_E0;
  r.D_E_r = d.D_E_r;
  r.drag_r0 = d.drag_r0;
  r.drag_r1 = d.drag_r1;

  const Field u = s.u(p.rho_floor);
  const Field gmu = ops.grad(s.mu);
  const Field rho = s.rho();
  const double c = 2.0 * p.nu;
  r.bd_log_term = p.r0 * c * integrate(pointwise_map(rho, [](double v) { return v - std::log(v); }));
  if (p.r1 != 0.0) {
    const Field w = pointwise_product(pointwise_product(s.mu, squared_magnitude(u)), dot(u, gmu));
    r.bd_work_terms -= 2.0 * p.r1 * c * integrate(w);
  }
  if (src.has_f()) {
    const Field fv = src.f_at(s.grid(), s.t);
    r.work_f = integrate(pointwise_product(s.mu, dot(fv, u)));
    r.bd_work_terms += 2.0 * c * integrate(dot(fv, gmu));
  }
  if (src.has_M() && p.kappa > 0.0) {
    const Field M = src.M_at(s.grid(), s.t);
    r.work_M = -std::sqrt(p.kappa) * integrate(pointwise_product(s.mu, frobenius_inner(M, ops.jacobian(u))));
    r.bd_work_terms -= std::sqrt(p.kappa) * c *
                       integrate(pointwise_product(s.mu, frobenius_inner(hessian_log_rho(ops, s.mu, p.rho_floor), M)));
  }
  return r;
}

std::vector<LedgerRow> ledger(const DiffOps& ops, const Trajectory& tr) {
  std::vector<LedgerRow> rows;
  rows.reserve(tr.states.size());
  for (const auto& s : tr.states) rows.push_back(ledger_row(ops, s, tr.params, tr.sources));
  return rows;
}

const std::vector<std::string>& ledger_columns() {
  static const std::vector<std::string> cols = {"t",     "E",       "E_BD",    "E_0",     "E_r",     "E_r_alt",
                                                "D_E",   "D_BD",    "D_E0",    "D_E_r",   "E_BD_2nu", "D_BD_2nu", "drag_r0", "drag_r1",
                                                "work_f", "work_M", "bd_work_terms", "bd_log_term"};
  return cols;
}

void write_ledger_csv(std::ostream& os, const std::vector<LedgerRow>& rows) {
  const auto& cols = ledger_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n" << std::setprecision(17);
  for (const auto& r : rows) {
    const double v[] = {r.t,       r.E,       r.E_BD,    r.E_0,    r.E_r,    r.E_r_alt,
                        r.D_E,     r.D_BD,    r.D_E0,    r.D_E_r,  r.E_BD_2nu, r.D_BD_2nu, r.drag_r0, r.drag_r1,
                        r.work_f,  r.work_M,  r.bd_work_terms, r.bd_log_term};
    for (std::size_t i = 0; i < std::size(v); ++i) os << (i ? "," : "") << v[i];
    os << "\n";
  }
}

double source_norm_f(const Trajectory& tr) {
  if (!tr.sources.has_f() || tr.states.size() < 2) return 0.0;
  const auto times = tr.times();
  std::vector<double> n;
  for (const auto& s : tr.states) n.push_back(lp_norm(tr.sources.f_at(s.grid(), s.t), 2.0));
  return mixed_norm_from_slices(times, n, {1.0, 2.0, times.front(), times.back()});
}

double source_norm_M(const Trajectory& tr) {
  if (!tr.sources.has_M() || tr.states.size() < 2) return 0.0;
  const auto times = tr.times();
  std::vector<double> n;
  for (const auto& s : tr.states) n.push_back(lp_norm(tr.sources.M_at(s.grid(), s.t), 2.0));
  return mixed_norm_from_slices(times, n, {2.0, 2.0, times.front(), times.back()});
}

double M_r(const DiffOps& ops, const Trajectory& tr) {
  return e_r(ops, tr.states.front(), tr.params) + source_norm_f(tr) + source_norm_M(tr);
}

EquivalenceReport equivalence_check(const DiffOps& ops, const std::vector<FlowState>& states, const ModelParams& p) {
  EquivalenceReport rep;
  for (const auto& s : states) {
    const Functionals f = functionals(ops, s, p);
    const Dissipations d = dissipations(ops, s, p);
    const double re = f.E_0 / (f.E + f.E_BD);
    rep.C_energy = std::max({rep.C_energy, re, 1.0 / re});
    const double den = d.D_E + d.D_BD;
    if (den > 1e-14 && d.D_E0 > 1e-14) {
      const double rd = d.D_E0 / den;
      rep.C_dissipation = std::max({rep.C_dissipation, rd, 1.0 / rd});
    }
    ++rep.states_used;
  }
  rep.C_star = std::max(rep.C_energy, rep.C_dissipation);
  if (!std::isfinite(rep.C_star)) throw InvariantViolation("equivalence", "non-finite constant");
  return rep;
}

BudgetReport budget(const DiffOps& ops, const Trajectory& tr, double gronwall_slack) {
  if (tr.states.size() < 2) throw std::invalid_argument("budget: need at least two recorded states");
  BudgetReport rep;
  rep.rows = ledger(ops, tr);
  const auto& rows = rep.rows;
  const auto times = tr.times();
  rep.t0 = times.front();
  rep.t1 = times.back();
  const std::size_t n = rows.size();
  std::vector<double> diss_e(n), work_e(n), diss_bd(n), work_bd(n), der(n);
  for (std::size_t k = 0; k < n; ++k) {
    diss_e[k] = rows[k].D_E + rows[k].drag_r0 + rows[k].drag_r1;
    work_e[k] = rows[k].work_f + rows[k].work_M;
    diss_bd[k] = rows[k].D_BD_2nu + rows[k].drag_r0 + rows[k].drag_r1;
    work_bd[k] = work_e[k] + rows[k].bd_work_terms;
    der[k] = rows[k].D_E_r;
  }
  auto bd_total = [&](std::size_t k) { return rows[k].E_BD_2nu + rows[k].bd_log_term; };
  rep.energy_scale = rows.front().E;
  rep.bd_scale = bd_total(0);

  double cum_de = 0.0, cum_we = 0.0, cum_db = 0.0, cum_wb = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double h = times[k] - times[k - 1];
    cum_de += 0.5 * h * (diss_e[k] + diss_e[k - 1]);
    cum_we += 0.5 * h * (work_e[k] + work_e[k - 1]);
    cum_db += 0.5 * h * (diss_bd[k] + diss_bd[k - 1]);
    cum_wb += 0.5 * h * (work_bd[k] + work_bd[k - 1]);
    if (rows[k].E + cum_de - cum_we > rows[0].E + 1e-6 * std::abs(rep.energy_scale)) rep.energy_sign_ok = false;
    if (bd_total(k) + cum_db - cum_wb > bd_total(0) + 1e-6 * std::abs(rep.bd_scale)) rep.bd_sign_ok = false;
  }
  for (const auto& r : rows) {
    const double tol = -1e-12 * std::max(1.0, std::abs(r.E));
    if (r.D_E < tol || r.D_BD < tol || r.D_BD_2nu < tol || r.D_E_r < tol) rep.energy_sign_ok = rep.bd_sign_ok = false;
  }
  rep.energy.lhs = rows.back().E - rows.front().E + cum_de;
  rep.energy.rhs = cum_we;
  rep.energy.residual = rep.energy.lhs - rep.energy.rhs;
  rep.bd.lhs = bd_total(n - 1) - bd_total(0) + cum_db;
  rep.bd.rhs = cum_wb;
  rep.bd.residual = rep.bd.lhs - rep.bd.rhs;
  rep.bd_assertable = !tr.sources.has_M() || tr.sources.symmetric_M || tr.params.nu * tr.params.r1 <= 1.0 / 9.0;

  rep.M_r = M_r(ops, tr);
  for (const auto& r : rows) rep.max_E_r = std::max(rep.max_E_r, r.E_r);
  rep.int_D_E_r = trapezoid(times, der);
  rep.gronwall_bound_ok =
      rep.max_E_r <= rep.M_r * (1.0 + gronwall_slack) && rep.int_D_E_r <= rep.M_r * (1.0 + gronwall_slack);
  for (double dt : tr.dt_history) rep.dt_max = std::max(rep.dt_max, dt);
  rep.h = ops.grid().spacing();
  return rep;
}

std::vector<AprioriEntry> apriori_table(const DiffOps& ops, const Trajectory& tr, double cutoff_m) {
  const ModelParams& p = tr.params;
  const auto times = tr.times();
  const std::size_t n = tr.states.size();
  struct Spec {
    std::string name;
    double exponent;
  };
  const std::vector<Spec> specs = {{"rho", 5.0},
                                   {"rho_u", 2.5},
                                   {"flux_density", 5.0 / 3.0},
                                   {"pressure_product", 1.25},
                                   {"r0_u", 2.0},
                                   {"r1_rho_u2_u", 1.25},
                                   {"grad_phi_m_rho", 4.0},
                                   {"dt_phi_m_rho", 2.0}};
  std::vector<std::vector<double>> slices(specs.size(), std::vector<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const FlowState& s = tr.states[k];
    check_floor(s.mu, p.rho_floor);
    const TorusGrid& g = s.grid();
    const Field rho = s.rho();
    const Field u = s.u(p.rho_floor);
    const Field u2 = squared_magnitude(u);
    const Field gmu = ops.grad(s.mu);
    const StressBundle b = viscous_tensor(ops, s.mu, u, p);
    // S_kappa = sqrt(kappa) (hess mu - grad mu (x) grad mu / mu)
    Field skappa = ops.hessian(s.mu);
    {
      const Field gg = outer(gmu, gmu);
      for (int c = 0; c < skappa.components(); ++c)
        for (std::size_t q = 0; q < g.size(); ++q)
          skappa(q, c) = std::sqrt(p.kappa) * (skappa(q, c) - gg(q, c) / s.mu(q));
    }
    const Field M = tr.sources.M_at(g, s.t);
    const Field f = tr.sources.f_at(g, s.t);
    const Field sn = squared_magnitude(b.S_nu), sk = squared_magnitude(skappa), mm = squared_magnitude(M),
                ff = squared_magnitude(f);
    Field flux = Field::scalar(g);
    for (std::size_t q = 0; q < g.size(); ++q)
      flux(q) = rho(q) * u2(q) + s.mu(q) * (std::sqrt(sn(q)) + std::sqrt(sk(q)) + std::sqrt(mm(q)) + std::sqrt(ff(q)));
    const Field mug = pointwise_map(s.mu, [gm = p.gamma](double v) { return std::pow(v, gm); });
    const Field pressure = pointwise_product(mug, ops.grad(mug));
    const Field r1term = pointwise_product(pointwise_product(rho, u2), u) * p.r1;
    const Field dphi = pointwise_map(s.mu, [cutoff_m](double v) { return phi_m_prime(v * v, cutoff_m); });
    const Field grad_phi = pointwise_product(pointwise_product(dphi, s.mu), gmu) * 2.0;
    const Field dt_phi = pointwise_product(dphi, ops.div(s.m)) * -1.0;

    slices[0][k] = lp_norm(rho, 5.0);
    slices[1][k] = lp_norm(s.m, 2.5);
    slices[2][k] = lp_norm(flux, 5.0 / 3.0);
    slices[3][k] = lp_norm(pressure, 1.25);
    slices[4][k] = p.r0 * lp_norm(u, 2.0);
    slices[5][k] = lp_norm(r1term, 1.25);
    slices[6][k] = lp_norm(grad_phi, 4.0);
    slices[7][k] = lp_norm(dt_phi, 2.0);
  }
  const double mr = M_r(ops, tr);
  std::vector<AprioriEntry> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    AprioriEntry e;
    e.name = specs[i].name;
    e.exponent = specs[i].exponent;
    e.value = mixed_norm_from_slices(times, slices[i], {e.exponent, e.exponent, times.front(), times.back()});
    e.ratio_to_M_r = mr > 0.0 ? e.value / mr : 0.0;
    out.push_back(e);
  }
  return out;
}

}  // namespace qns
