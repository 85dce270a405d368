#include "doctest.h"
#include "qns/limit_lab.hpp"

#include <cmath>
#include <sstream>

using namespace qns;

namespace {
FlowState pulse(const TorusGrid& g, double amp = 0.2) {
  FlowState s;
  s.mu = Field::sample(g, [amp](double x, double y) {
    const double r2 = (x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5);
    return std::sqrt(1.0 + amp * std::exp(-r2 / (2 * 0.1 * 0.1)));
  });
  s.m = Field::vector(g);
  for (std::size_t q = 0; q < g.size(); ++q) s.m(q, 0) = 0.2 * s.mu(q) * s.mu(q) * std::sin(2 * kPi * g.coord(q, 1));
  return s;
}

SweepPlan plan(SweepParam which, std::vector<double> values) {
  SweepPlan p;
  p.varying = which;
  p.values = std::move(values);
  p.base.nu = 0.05;
  p.base.kappa = 0.01;
  p.base.r0 = 0.05;
  p.base.r1 = 0.05;
  p.initial = pulse(TorusGrid(2, 16));
  p.step.t_end = 0.1;
  p.step.cfl = 0.25;
  p.step.record_every = 2;
  return p;
}
}  // namespace

TEST_CASE("joined power law") {
  CHECK(h_interp(1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(h_interp(2.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(h_interp(0.3) == doctest::Approx(std::pow(0.3, 0.75)).epsilon(1e-15));
  CHECK(h_interp(5.0) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
  const double e = 1e-9;
  for (double y : {1.0, 2.0}) {
    CHECK(h_interp(y - e) == doctest::Approx(h_interp(y + e)).epsilon(1e-8));
    CHECK(h_interp_prime(y - e) == doctest::Approx(h_interp_prime(y + e)).epsilon(1e-8));
    CHECK(h_interp_second(y - e) == doctest::Approx(h_interp_second(y + e)).epsilon(1e-7));
  }
  double prev = h_interp(0.999);
  for (int k = 0; k <= 10000; ++k) {
    const double y = 1.0 + k / 10000.0;
    CHECK(h_interp_prime(y) > 0.0);
    CHECK(h_interp(y) > prev);
    prev = h_interp(y);
  }
  for (double y : {1.1, 1.5, 1.9}) {
    const double s = 1e-6;
    CHECK(h_interp_prime(y) == doctest::Approx((h_interp(y + s) - h_interp(y - s)) / (2 * s)).epsilon(1e-8));
    CHECK(h_interp_second(y) == doctest::Approx((h_interp_prime(y + s) - h_interp_prime(y - s)) / (2 * s)).epsilon(1e-7));
  }
  CHECK_THROWS_AS(h_interp(-1.0), std::invalid_argument);
}

TEST_CASE("stability distances of a trajectory to itself vanish") {
  const SweepPlan p = plan(SweepParam::kappa, {0.01, 0.0});
  DiffOps ops(p.initial.grid());
  const Trajectory tr = evolve(ops, p.initial, p.base, {}, p.step);
  const StabilityNorms n = stability_norms(ops, tr, tr);
  for (double v : {n.rho_L1, n.rho_L2, n.rho_L3, n.m_weak, n.m_strong, n.sqrt_rho_phi, n.rho13_u, n.r0_u, n.grad_h})
    CHECK(v == 0.0);
  Trajectory short_tr = tr;
  short_tr.states.pop_back();
  CHECK_THROWS_AS(stability_norms(ops, short_tr, tr), std::invalid_argument);
  Trajectory shifted = tr;
  shifted.states[1].t += 1e-3;
  CHECK_THROWS_AS(stability_norms(ops, shifted, tr), std::invalid_argument);
}

TEST_CASE("sweep plan validation") {
  CHECK_THROWS_AS(plan(SweepParam::kappa, {0.1}).validate(), ConfigError);
  CHECK_THROWS_AS(plan(SweepParam::kappa, {0.1, 0.2}).validate(), ConfigError);
  CHECK_THROWS_AS(plan(SweepParam::kappa, {0.1, -0.1}).validate(), ConfigError);
  CHECK_THROWS_AS(plan(SweepParam::nu, {0.1, 0.0}).validate(), ConfigError);
  CHECK_NOTHROW(plan(SweepParam::r1, {0.1, 0.1, 0.0}).validate());
  CHECK(sweep_param_from_string(to_string(SweepParam::r0)) == SweepParam::r0);
  CHECK_THROWS_AS(sweep_param_from_string("gamma"), ConfigError);
  const SweepPlan p = plan(SweepParam::r1, {0.3, 0.0});
  CHECK(p.params_for(0.3).r1 == 0.3);
  CHECK(p.params_for(0.3).kappa == p.base.kappa);
}

TEST_CASE("degenerate sweep") {
  const ConvergenceTable t = run_sweep(plan(SweepParam::kappa, {0.02, 0.02, 0.02, 0.02}));
  REQUIRE(t.rows.size() == 4);
  for (const auto& r : t.rows) {
    CHECK_FALSE(r.failed);
    CHECK(r.norms.rho_L2 == 0.0);
    CHECK(r.norms.grad_h == 0.0);
  }
}

TEST_CASE("semi-classical sweep") {
  const ConvergenceTable t = run_sweep(plan(SweepParam::kappa, {0.04, 0.02, 0.01, 0.005, 0.0}));
  REQUIRE(t.rows.size() == 5);
  for (const auto& r : t.rows) CHECK_FALSE(r.failed);
  MESSAGE("kappa sweep rates: rho " << t.fitted_rate_rho << ", sqrt(rho) atan(u) " << t.fitted_rate_phi
                                    << ", final/initial " << t.final_over_initial);
  CHECK(t.monotone);
  CHECK(t.fitted_rate_rho > 0.5);
  CHECK(t.fitted_rate_phi > 0.0);
  CHECK(t.final_over_initial <= 0.5);
  CHECK(t.rows.back().norms.rho_L2 == 0.0);
  std::ostringstream os;
  write_convergence_csv(os, t);
  std::string line;
  std::istringstream is(os.str());
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == 6);
  CHECK(os.str().rfind("value,failed,rho_L1,rho_L2", 0) == 0);
}

TEST_CASE("drag sweep") {
  SweepPlan p = plan(SweepParam::r0, {0.4, 0.2, 0.1, 0.05, 0.0});
  const ConvergenceTable t = run_sweep(p);
  MESSAGE("r0 sweep rate " << t.fitted_rate_rho);
  CHECK(t.monotone);
  CHECK(t.fitted_rate_rho > 0.5);
  const ConvergenceTable t1 = run_sweep(plan(SweepParam::r1, {0.4, 0.2, 0.1, 0.05, 0.0}));
  MESSAGE("r1 sweep rate " << t1.fitted_rate_rho);
  CHECK(t1.monotone);
  CHECK(t1.fitted_rate_rho > 0.5);
}

TEST_CASE("mode-4 distance respects the triangle inequality") {
  const SweepPlan p = plan(SweepParam::kappa, {0.05, 0.0});
  DiffOps ops(p.initial.grid());
  StepConfig cfg = p.step;
  cfg.fixed_dt = 1e-3;
  const Trajectory a = evolve(ops, p.initial, p.params_for(0.05), {}, cfg);
  const Trajectory b = evolve(ops, p.initial, p.params_for(0.0), {}, cfg);
  const StabilityNorms n = stability_norms(ops, a, b);
  std::vector<Field> dmu, cross;
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    dmu.push_back(a.states[k].mu - b.states[k].mu);
    const Field ua = a.states[k].u(1e-8), ub = b.states[k].u(1e-8);
    Field c = Field::vector(ops.grid());
    for (std::size_t q = 0; q < ops.grid().size(); ++q)
      for (int i = 0; i < 2; ++i) c(q, i) = b.states[k].mu(q) * (std::atan(ua(q, i)) - std::atan(ub(q, i)));
    cross.push_back(c);
  }
  const auto times = a.times();
  const MixedNormSpec l22{2.0, 2.0, times.front(), times.back()};
  const double bound = 0.5 * kPi * std::sqrt(2.0) * mixed_norm(times, dmu, l22) + mixed_norm(times, cross, l22);
  CHECK(n.sqrt_rho_phi > 0.0);
  CHECK(n.sqrt_rho_phi <= bound * (1.0 + 1e-12));
}

TEST_CASE("a failing member is recorded, not thrown") {
  SweepPlan p = plan(SweepParam::kappa, {50.0, 0.01, 0.0});
  p.step.fixed_dt = 0.002;
  const ConvergenceTable t = run_sweep(p);
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].failed);
  CHECK_FALSE(t.rows[0].error.empty());
  CHECK_FALSE(t.rows[1].failed);
  CHECK_FALSE(t.monotone);
}
