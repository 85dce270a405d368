#include "qns/limit_lab.hpp"

#include "qns/renormalization.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <limits>
#include <ostream>

namespace qns {

std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::kappa: return "kappa";
    case SweepParam::r0: return "r0";
    case SweepParam::r1: return "r1";
    case SweepParam::nu: return "nu";
  }
  return "kappa";
}

SweepParam sweep_param_from_string(const std::string& s) {
  if (s == "kappa") return SweepParam::kappa;
  if (s == "r0") return SweepParam::r0;
  if (s == "r1") return SweepParam::r1;
  if (s == "nu") return SweepParam::nu;
  throw ConfigError("unknown sweep parameter '" + s + "'");
}

// ---------------------------------------------------------------- h join

namespace {

struct Quintic {
  double a[6];
  Quintic() {
    // value, slope and curvature of y^{3/4} at 1 and y^{1/2} at 2, on t = y - 1
    const double h0 = 1.0, d0 = 0.75, s0 = -0.1875;
    const double r2 = std::sqrt(2.0);
    const double h1 = r2, d1 = 0.5 / r2, s1 = -0.25 / (2.0 * r2);
    a[0] = h0;
    a[1] = d0;
    a[2] = 0.5 * s0;
    const double A = h1 - (a[0] + a[1] + a[2]), B = d1 - (a[1] + 2.0 * a[2]), C = s1 - 2.0 * a[2];
    a[3] = 10.0 * A - 4.0 * B + 0.5 * C;
    a[4] = -15.0 * A + 7.0 * B - C;
    a[5] = 6.0 * A - 3.0 * B + 0.5 * C;
  }
  double v(double t) const { return a[0] + t * (a[1] + t * (a[2] + t * (a[3] + t * (a[4] + t * a[5])))); }
  double d(double t) const { return a[1] + t * (2 * a[2] + t * (3 * a[3] + t * (4 * a[4] + t * 5 * a[5]))); }
  double s(double t) const { return 2 * a[2] + t * (6 * a[3] + t * (12 * a[4] + t * 20 * a[5])); }
};

const Quintic& join() {
  static const Quintic q;
  return q;
}

}  // namespace

double h_interp(double y) {
  if (y < 0.0) throw std::invalid_argument("h: negative argument");
  if (y <= 1.0) return std::pow(y, 0.75);
  if (y >= 2.0) return std::sqrt(y);
  return join().v(y - 1.0);
}

double h_interp_prime(double y) {
  if (y < 0.0) throw std::invalid_argument("h: negative argument");
  if (y <= 1.0) return 0.75 * std::pow(y, -0.25);
  if (y >= 2.0) return 0.5 / std::sqrt(y);
  return join().d(y - 1.0);
}

double h_interp_second(double y) {
  if (y < 0.0) throw std::invalid_argument("h: negative argument");
  if (y <= 1.0) return -0.1875 * std::pow(y, -1.25);
  if (y >= 2.0) return -0.25 * std::pow(y, -1.5);
  return join().s(y - 1.0);
}

// ------------------------------------------------------- stability modes

StabilityNorms stability_norms(const DiffOps& ops, const Trajectory& run, const Trajectory& ref) {
  if (run.states.size() != ref.states.size() || run.states.size() < 2)
    throw std::invalid_argument("stability_norms: trajectories must share at least two recorded times");
  for (std::size_t k = 0; k < run.states.size(); ++k) {
    if (std::abs(run.states[k].t - ref.states[k].t) > 1e-12 * std::max(1.0, std::abs(ref.states[k].t)))
      throw std::invalid_argument("stability_norms: recorded times differ");
    if (!(run.states[k].grid() == ref.states[k].grid()) || !(run.states[k].grid() == ops.grid()))
      throw std::invalid_argument("stability_norms: grids differ");
  }
  const TorusGrid& g = ops.grid();
  const int d = g.dim();
  const auto times = ref.times();
  const std::size_t n = times.size();
  std::vector<Field> mom, phis, r13, r0u, gh;
  StabilityNorms out;
  std::vector<Field> space;
  for (const TestFn& psi : test_dictionary(times.front(), times.back(), d)) space.push_back(psi.space(g));

  auto at = [&](const Trajectory& tr, std::size_t k) {
    const FlowState& s = tr.states[k];
    struct {
      Field rho, u, sphi, r13u, r0u, gradh;
    } o;
    o.rho = s.rho();
    o.u = s.u(tr.params.rho_floor);
    o.sphi = Field::vector(g);
    o.r13u = Field::vector(g);
    double y[2] = {0.0, 0.0};
    for (std::size_t q = 0; q < g.size(); ++q) {
      for (int i = 0; i < d; ++i) y[i] = o.u(q, i);
      for (int i = 0; i < d; ++i) {
        o.sphi(q, i) = s.mu(q) * std::atan(y[i]);
        o.r13u(q, i) = std::cbrt(o.rho(q)) * y[i];
      }
    }
    o.r0u = o.u * std::sqrt(tr.params.r0);
    const Field dh = pointwise_map(s.mu, [](double v) { return h_interp_prime(v * v) * 2.0 * v; });
    o.gradh = pointwise_product(dh, ops.grad(s.mu));
    return o;
  };

  for (std::size_t k = 0; k < n; ++k) {
    const auto a = at(run, k), b = at(ref, k);
    const Field drho = a.rho - b.rho;
    out.rho_L1 = std::max(out.rho_L1, lp_norm(drho, 1.0));
    out.rho_L2 = std::max(out.rho_L2, lp_norm(drho, 2.0));
    out.rho_L3 = std::max(out.rho_L3, lp_norm(drho, 3.0));
    const Field dm = run.states[k].m - ref.states[k].m;
    for (const Field& P : space)
      for (int i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t q = 0; q < g.size(); ++q) acc += dm(q, i) * P(q);
        out.m_weak = std::max(out.m_weak, std::abs(acc) / double(g.size()));
      }
    mom.push_back(dm);
    phis.push_back(a.sphi - b.sphi);
    r13.push_back(a.r13u - b.r13u);
    r0u.push_back(a.r0u - b.r0u);
    gh.push_back(a.gradh - b.gradh);
  }
  const double t0 = times.front(), t1 = times.back();
  out.m_strong = mixed_norm(times, mom, {2.0, 1.25, t0, t1});
  out.sqrt_rho_phi = mixed_norm(times, phis, {2.0, 2.0, t0, t1});
  out.rho13_u = mixed_norm(times, r13, {2.0, 2.0, t0, t1});
  out.r0_u = mixed_norm(times, r0u, {1.5, 1.5, t0, t1});
  out.grad_h = mixed_norm(times, gh, {2.0, 4.0, t0, t1});
  return out;
}

// ------------------------------------------------------------------ sweep

void SweepPlan::validate() const {
  if (values.size() < 2) throw ConfigError("sweep: need at least two values");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0) || !std::isfinite(values[i])) throw ConfigError("sweep: values must be finite and >= 0");
    if (i > 0 && values[i] > values[i - 1]) throw ConfigError("sweep: values must be non-increasing");
  }
  if (varying == SweepParam::nu && values.back() <= 0.0) throw ConfigError("sweep: nu must stay positive");
  base.validate();
  step.validate();
  if (initial.mu.points() == 0) throw ConfigError("sweep: missing initial state");
}

ModelParams SweepPlan::params_for(double value) const {
  ModelParams p = base;
  switch (varying) {
    case SweepParam::kappa: p.kappa = value; break;
    case SweepParam::r0: p.r0 = value; break;
    case SweepParam::r1: p.r1 = value; break;
    case SweepParam::nu: p.nu = value; break;
  }
  return p;
}

ConvergenceTable run_sweep(const SweepPlan& plan) {
  plan.validate();
  ConvergenceTable tab;
  tab.varying = plan.varying;
  double dt = plan.step.fixed_dt;
  if (dt <= 0.0) {
    dt = std::numeric_limits<double>::infinity();
    for (double v : plan.values) dt = std::min(dt, cfl_dt(plan.initial, plan.params_for(v), plan.step.cfl));
  }
  tab.shared_dt = dt;
  StepConfig cfg = plan.step;
  cfg.fixed_dt = dt;

  struct Outcome {
    Trajectory tr;
    std::string error;
  };
  std::vector<std::future<Outcome>> jobs;
  for (double v : plan.values) {
    jobs.push_back(std::async(std::launch::async, [&plan, cfg, v] {
      Outcome o;
      try {
        DiffOps ops(plan.initial.grid(), plan.backend);
        o.tr = evolve(ops, plan.initial, plan.params_for(v), plan.sources, cfg);
      } catch (const std::exception& e) {
        o.error = e.what();
      }
      return o;
    }));
  }
  std::vector<Outcome> runs;
  for (auto& j : jobs) runs.push_back(j.get());

  const Outcome& ref = runs.back();
  DiffOps ops(plan.initial.grid(), plan.backend);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    SweepRow row;
    row.value = plan.values[i];
    if (!runs[i].error.empty() || !ref.error.empty()) {
      row.failed = true;
      row.error = !runs[i].error.empty() ? runs[i].error : "reference run failed: " + ref.error;
    } else {
      row.norms = stability_norms(ops, runs[i].tr, ref.tr);
    }
    tab.rows.push_back(row);
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> xs, yr, yp;
  for (std::size_t i = 0; i + 1 < tab.rows.size(); ++i) {
    SweepRow& r = tab.rows[i];
    const SweepRow& nx = tab.rows[i + 1];
    r.local_rate = nan;
    if (!r.failed && !nx.failed && nx.value > 0.0 && r.value > nx.value && r.norms.rho_L2 > 0.0 && nx.norms.rho_L2 > 0.0)
      r.local_rate = std::log(r.norms.rho_L2 / nx.norms.rho_L2) / std::log(r.value / nx.value);
    if (!r.failed && r.value > 0.0 && r.norms.rho_L2 > 0.0) {
      xs.push_back(r.value);
      yr.push_back(r.norms.rho_L2);
      yp.push_back(std::max(r.norms.sqrt_rho_phi, std::numeric_limits<double>::min()));
    }
  }
  tab.rows.back().local_rate = nan;
  tab.fitted_rate_rho = xs.size() >= 2 ? fitted_slope(xs, yr) : nan;
  tab.fitted_rate_phi = xs.size() >= 2 ? fitted_slope(xs, yp) : nan;

  tab.monotone = true;
  for (std::size_t i = 0; i + 1 < tab.rows.size(); ++i) {
    if (tab.rows[i].failed || tab.rows[i + 1].failed) {
      tab.monotone = false;
      continue;
    }
    if (tab.rows[i + 1].norms.rho_L2 > 1.05 * tab.rows[i].norms.rho_L2) tab.monotone = false;
  }
  if (tab.rows.size() >= 3 && !tab.rows.front().failed && !tab.rows[tab.rows.size() - 2].failed) {
    const double first = tab.rows.front().norms.rho_L2, last = tab.rows[tab.rows.size() - 2].norms.rho_L2;
    tab.final_over_initial = first > 0.0 ? last / first : 0.0;
  }
  return tab;
}

const std::vector<std::string>& convergence_columns() {
  static const std::vector<std::string> cols = {
      "value",        "failed",  "rho_L1", "rho_L2",     "rho_L3",          "m_weak",         "m_strong",
      "sqrt_rho_phi", "rho13_u", "r0_u",   "grad_h",     "local_rate_rho", "fitted_rate_rho", "fitted_rate_phi"};
  return cols;
}

void write_convergence_csv(std::ostream& os, const ConvergenceTable& t) {
  const auto& cols = convergence_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n" << std::setprecision(17);
  for (const auto& r : t.rows) {
    const auto& n = r.norms;
    os << r.value << "," << (r.failed ? 1 : 0) << "," << n.rho_L1 << "," << n.rho_L2 << "," << n.rho_L3 << ","
       << n.m_weak << "," << n.m_strong << "," << n.sqrt_rho_phi << "," << n.rho13_u << "," << n.r0_u << ","
       << n.grad_h << "," << r.local_rate << "," << t.fitted_rate_rho << "," << t.fitted_rate_phi << "\n";
  }
}

}  // namespace qns
