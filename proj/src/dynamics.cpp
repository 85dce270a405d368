#include "qns/dynamics.hpp"

#include "qns/jet.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace qns {

Field FlowState::rho() const {
  return pointwise_map(mu, [](double v) { return v * v; });
}

Field FlowState::u(double rho_floor) const { return velocity(mu, m, rho_floor); }

std::string to_string(Scheme s) { return s == Scheme::rk4 ? "rk4" : "ssp_rk3"; }

Scheme scheme_from_string(const std::string& s) {
  if (s == "rk4") return Scheme::rk4;
  if (s == "ssp_rk3") return Scheme::ssp_rk3;
  throw ConfigError("unknown scheme '" + s + "'");
}

void StepConfig::validate() const {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("step: cfl must lie in (0, 1]");
  if (!(t_end > 0.0)) throw ConfigError("step: t_end must be positive");
  if (record_every < 1) throw ConfigError("step: record_every must be >= 1");
  if (fixed_dt < 0.0) throw ConfigError("step: fixed_dt must be nonnegative");
}

std::vector<double> Trajectory::times() const {
  std::vector<double> t;
  t.reserve(states.size());
  for (const auto& s : states) t.push_back(s.t);
  return t;
}

namespace {

// nu rho (J + J^T) plus the quantum part, the same tensor as 2 sqrt(nu) mu S_nu + S_kappa.
Field stress_from(const DiffOps& ops, const FlowState& s, const Field& u, const ModelParams& p,
                  const SourceTerms& src) {
  const int d = s.grid().dim();
  const Field J2 = ops.sym_jacobian(u);
  Field stress = quantum_stress_div_form(ops, s.mu, p.kappa, p.rho_floor);
  for (int c = 0; c < d * d; ++c)
    for (std::size_t q = 0; q < stress.points(); ++q) stress(q, c) += p.nu * s.mu(q) * s.mu(q) * J2(q, c);
  if (src.has_M() && p.kappa > 0.0) stress.axpy(std::sqrt(p.kappa), pointwise_product(s.mu, src.M_at(s.grid(), s.t)));
  return stress;
}

}  // namespace

Field stress_tensor(const DiffOps& ops, const FlowState& s, const ModelParams& p, const SourceTerms& src) {
  return stress_from(ops, s, s.u(p.rho_floor), p, src);
}

Field momentum_flux(const DiffOps& ops, const FlowState& s, const ModelParams& p, const SourceTerms& src) {
  const Field u = s.u(p.rho_floor);
  return stress_from(ops, s, u, p, src) - ops.dealias(outer(s.m, u));
}

Tendency rhs(const DiffOps& ops, const FlowState& s, const ModelParams& p, const SourceTerms& src) {
  if (!s.m.finite()) throw NumericalAbort("non-finite momentum at t = " + std::to_string(s.t));
  check_floor(s.mu, p.rho_floor);
  const Field u = s.u(p.rho_floor);
  Tendency k;
  k.drho = ops.div(s.m) * -1.0;
  k.dm = ops.div_mat_dealiased(stress_from(ops, s, u, p, src), outer(s.m, u), -1.0);
  k.dm += assemble_force_F(ops, s.mu, s.m, p, src, s.t);
  if (!k.drho.finite() || !k.dm.finite()) throw NumericalAbort("non-finite tendency at t = " + std::to_string(s.t));
  return k;
}

double cfl_dt(const FlowState& s, const ModelParams& p, double cfl) {
  check_floor(s.mu, p.rho_floor);
  const double h = s.grid().spacing();
  const Field u2 = squared_magnitude(s.u(p.rho_floor));
  double speed = 0.0;
  for (std::size_t q = 0; q < u2.points(); ++q) {
    const double rho = s.mu(q) * s.mu(q);
    speed = std::max(speed, std::sqrt(u2(q)) + std::sqrt(p.gamma * std::pow(rho, p.gamma - 1.0)));
  }
  double dt = std::min(h / speed, h * h / (4.0 * p.nu));
  if (p.kappa > 0.0) dt = std::min(dt, h * h / (2.0 * std::sqrt(p.kappa)));
  return cfl * dt;
}

namespace {

struct Stage {
  Field rho;
  Field m;
};

FlowState to_state(Stage st, double t, double rho_floor, int stage_index) {
  FlowState s;
  s.t = t;
  s.m = std::move(st.m);
  s.mu = Field::scalar(st.rho.grid());
  for (std::size_t q = 0; q < st.rho.points(); ++q) {
    const double r = st.rho(q);
    if (!std::isfinite(r)) throw NumericalAbort("non-finite density in stage " + std::to_string(stage_index));
    s.mu(q) = r > 0.0 ? std::sqrt(r) : 0.0;
  }
  try {
    check_floor(s.mu, rho_floor);
  } catch (const FloorViolation& e) {
    throw StageFloorViolation(e, s, stage_index);
  }
  return s;
}

Stage combine(Stage base, double a, const Tendency& k) {
  base.rho.axpy(a, k.drho);
  base.m.axpy(a, k.dm);
  return base;
}

}  // namespace

FlowState step(const DiffOps& ops, const FlowState& s, double dt, Scheme scheme, const ModelParams& p,
               const SourceTerms& src) {
  const Stage y0{s.rho(), s.m};
  const double t = s.t;
  if (scheme == Scheme::rk4) {
    const Tendency k1 = rhs(ops, s, p, src);
    const Tendency k2 = rhs(ops, to_state(combine(y0, 0.5 * dt, k1), t + 0.5 * dt, p.rho_floor, 2), p, src);
    const Tendency k3 = rhs(ops, to_state(combine(y0, 0.5 * dt, k2), t + 0.5 * dt, p.rho_floor, 3), p, src);
    const Tendency k4 = rhs(ops, to_state(combine(y0, dt, k3), t + dt, p.rho_floor, 4), p, src);
    Stage y = combine(y0, dt / 6.0, k1);
    y = combine(std::move(y), dt / 3.0, k2);
    y = combine(std::move(y), dt / 3.0, k3);
    y = combine(std::move(y), dt / 6.0, k4);
    return to_state(std::move(y), t + dt, p.rho_floor, 5);
  }
  const Stage y1 = combine(y0, dt, rhs(ops, s, p, src));
  const Stage y1b = combine(y1, dt, rhs(ops, to_state(y1, t + dt, p.rho_floor, 2), p, src));
  Stage y2{0.75 * y0.rho + 0.25 * y1b.rho, 0.75 * y0.m + 0.25 * y1b.m};
  const Stage y2b = combine(y2, dt, rhs(ops, to_state(y2, t + 0.5 * dt, p.rho_floor, 3), p, src));
  Stage y3{(1.0 / 3.0) * y0.rho + (2.0 / 3.0) * y2b.rho, (1.0 / 3.0) * y0.m + (2.0 / 3.0) * y2b.m};
  return to_state(y3, t + dt, p.rho_floor, 4);
}

Trajectory evolve(const DiffOps& ops, const FlowState& s0, const ModelParams& p, const SourceTerms& src,
                  const StepConfig& cfg) {
  p.validate();
  cfg.validate();
  check_floor(s0.mu, p.rho_floor);
  Trajectory tr;
  tr.params = p;
  tr.sources = src;
  tr.states.push_back(s0);
  FlowState s = s0;
  const double t_end = s0.t + cfg.t_end;
  long count = 0;
  while (t_end - s.t > 1e-12 * std::max(1.0, std::abs(t_end))) {
    double dt = cfg.fixed_dt > 0.0 ? cfg.fixed_dt : cfl_dt(s, p, cfg.cfl);
    if (s.t + dt > t_end || t_end - (s.t + dt) < 1e-9 * dt) dt = t_end - s.t;
    s = step(ops, s, dt, cfg.scheme, p, src);
    ++count;
    tr.dt_history.push_back(dt);
    const bool last = t_end - s.t <= 1e-12 * std::max(1.0, std::abs(t_end));
    if (last) s.t = t_end;
    if (count % cfg.record_every == 0 || last) tr.states.push_back(s);
  }
  return tr;
}

// ---------------------------------------------------------- manufactured

namespace {

using J = Jet<5>;

struct WaveJets {
  J rho, m1;
};

WaveJets wave(const ManufacturedSpec& spec, double xi) {
  const J x = J::variable(xi);
  WaveJets w;
  w.rho = 1.0 + spec.amplitude * sin(2.0 * kPi * x);
  w.m1 = spec.speed * w.rho + J::constant(spec.offset);
  return w;
}

double force_at(const ManufacturedSpec& spec, const ModelParams& p, double xi) {
  const WaveJets w = wave(spec, xi);
  const J& rho = w.rho;
  const J u = w.m1 / rho;
  const J mu = sqrt(rho);
  J lhs = (-spec.speed) * d(w.m1) + d(w.m1 * u) + d(pow(rho, p.gamma)) - d(2.0 * p.nu * rho * d(u));
  if (p.kappa > 0.0) lhs = lhs - 2.0 * p.kappa * rho * d(d(d(mu)) / mu);
  lhs = lhs + p.r0 * u + p.r1 * rho * u * u * u;
  return lhs.value() / mu.value();
}

}  // namespace

FlowState manufactured_state(const TorusGrid& g, const ManufacturedSpec& spec, double t) {
  FlowState s;
  s.t = t;
  s.mu = Field::sample(g, [&](double x, double) {
    return std::sqrt(1.0 + spec.amplitude * std::sin(2.0 * kPi * (x - spec.speed * t)));
  });
  s.m = Field::vector(g);
  for (std::size_t q = 0; q < g.size(); ++q) s.m(q, 0) = spec.speed * s.mu(q) * s.mu(q) + spec.offset;
  return s;
}

Field manufactured_force(const TorusGrid& g, const ManufacturedSpec& spec, const ModelParams& p, double t) {
  Field f = Field::vector(g);
  for (std::size_t q = 0; q < g.size(); ++q) f(q, 0) = force_at(spec, p, g.coord(q, 0) - spec.speed * t);
  return f;
}

SourceTerms manufactured_sources(const ManufacturedSpec& spec, const ModelParams& p) {
  SourceTerms src;
  src.f = [spec, p](const TorusGrid& g, double t) { return manufactured_force(g, spec, p, t); };
  return src;
}

std::vector<ManufacturedRun> manufactured_study(int dim, const std::vector<int>& resolutions, Backend backend,
                                                const ManufacturedSpec& spec, const ModelParams& p,
                                                const StepConfig& cfg) {
  std::vector<ManufacturedRun> out;
  const SourceTerms src = manufactured_sources(spec, p);
  for (int n : resolutions) {
    TorusGrid g(dim, n);
    DiffOps ops(g, backend);
    StepConfig c = cfg;
    c.record_every = 1 << 30;
    const Trajectory tr = evolve(ops, manufactured_state(g, spec, 0.0), p, src, c);
    const FlowState& end = tr.states.back();
    const FlowState exact = manufactured_state(g, spec, end.t);
    ManufacturedRun r;
    r.n = n;
    r.dt = tr.dt_history.empty() ? 0.0 : tr.dt_history.front();
    r.err_rho = (end.rho() - exact.rho()).max_abs();
    r.err_m = (end.m - exact.m).max_abs();
    out.push_back(r);
  }
  return out;
}

double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fitted_slope: need >= 2 paired samples");
  const double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace qns
