#include "doctest.h"
#include "qns/renormalization.hpp"

#include <cmath>
#include <limits>

using namespace qns;

namespace {
FlowState wavy(const TorusGrid& g, double amp_u, double amp_rho = 0.2) {
  FlowState s;
  s.mu = Field::sample(g, [amp_rho](double x, double y) {
    return std::sqrt(1.0 + amp_rho * std::sin(2 * kPi * x) + 0.5 * amp_rho * std::cos(2 * kPi * (x + y)));
  });
  s.m = Field::vector(g);
  for (std::size_t q = 0; q < g.size(); ++q) {
    const double x = g.coord(q, 0), y = g.coord(q, 1), rho = s.mu(q) * s.mu(q);
    s.m(q, 0) = rho * amp_u * std::sin(2 * kPi * y);
    if (g.dim() == 2) s.m(q, 1) = rho * 0.5 * amp_u * std::cos(2 * kPi * x);
  }
  return s;
}

ModelParams params() {
  ModelParams p;
  p.nu = 0.02;
  p.kappa = 0.004;
  p.r0 = 0.02;
  p.r1 = 0.02;
  return p;
}

void check_derivatives(const RenormFn& f, const double* y) {
  const int d = f.dim;
  const double h = 1e-5;
  double g[2], hs[4], gp[2], gm[2];
  f.grad(y, g);
  f.hess(y, hs);
  for (int i = 0; i < d; ++i) {
    double yp[2] = {y[0], d == 2 ? y[1] : 0.0}, ym[2] = {y[0], d == 2 ? y[1] : 0.0};
    yp[i] += h;
    ym[i] -= h;
    CHECK(g[i] == doctest::Approx((f.phi(yp) - f.phi(ym)) / (2 * h)).epsilon(1e-6).scale(1.0));
    f.grad(yp, gp);
    f.grad(ym, gm);
    for (int j = 0; j < d; ++j)
      CHECK(hs[j * d + i] == doctest::Approx((gp[j] - gm[j]) / (2 * h)).epsilon(1e-5).scale(1.0));
  }
}
}  // namespace

TEST_CASE("cutoff values") {
  CHECK(phi_m(0.2, 2.0) == 0.0);
  CHECK(phi_m(1.0, 2.0) == 1.0);
  CHECK(phi_m(3.0, 2.0) == 0.5);
  CHECK_THROWS_AS(phi_m(-0.1, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(phi_m_prime(-0.1, 2.0), std::invalid_argument);
  for (double m : {1.0, 2.0, 10.0}) {
    CHECK(phi_m(0.0, m) == 0.0);
    CHECK(phi_m(1.0 / (2 * m), m) == 0.0);
    CHECK(phi_m(0.75 / m, m) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(phi_m(1.0 / m, m) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(phi_m(m, m) == 1.0);
    CHECK(phi_m(1.5 * m, m) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(phi_m(2.0 * m, m) == 0.0);
    CHECK(phi_m(3.0 * m, m) == 0.0);
    // left-continuous derivative
    CHECK(phi_m_prime(1.0 / (2 * m), m) == 0.0);
    CHECK(phi_m_prime(1.0 / m, m) == 2.0 * m);
    if (m > 1.0) CHECK(phi_m_prime(m, m) == 0.0);
    CHECK(phi_m_prime(2.0 * m, m) == -1.0 / m);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
      const double y = 3.0 * m * k / 9999.0;
      const double v = phi_m(y, m);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      worst = std::max(worst, std::abs(y * phi_m_prime(y, m)));
    }
    CHECK(worst <= 2.0);
  }
}

TEST_CASE("truncated velocity") {
  TorusGrid g(2, 32);
  DiffOps ops(g);
  ModelParams p = params();
  FlowState s = wavy(g, 0.5, 0.0);
  const TruncatedVelocity tv = truncated_velocity(ops, s, p, 2.0);
  const Field u = s.u(p.rho_floor);
  CHECK((tv.v_m - u).max_abs() == 0.0);
  CHECK((tv.grad_v_m - ops.jacobian(u)).max_abs() < 1e-12);

  FlowState thin = s;
  const double m = 2.0, rho = 1.0 / (8.0 * m);
  thin.mu = Field::scalar(g, std::sqrt(rho));
  thin.m = thin.m * rho;
  CHECK(truncated_velocity(ops, thin, p, m).v_m.max_abs() == 0.0);

  TorusGrid gf(2, 128);
  DiffOps fine(gf);
  FlowState band = wavy(gf, 0.5, 0.25);
  double lo = 1e9, hi = 0.0;
  for (std::size_t q = 0; q < gf.size(); ++q) {
    lo = std::min(lo, band.mu(q) * band.mu(q));
    hi = std::max(hi, band.mu(q) * band.mu(q));
  }
  CHECK(lo >= 0.6);
  CHECK(hi <= 1.4);
  const TruncatedVelocity tb = truncated_velocity(fine, band, p, 2.0);
  CHECK((tb.grad_v_m - tb.grad_v_m_direct).max_abs() <= 1e-6);
}

TEST_CASE("truncated velocity decomposition with an active cutoff slope") {
  // rho in [1.7, 2.3] sits on the ramp 2 - y/m of phi_1.5, clear of the kinks at 1.5 and 3
  TorusGrid g(2, 128);
  DiffOps ops(g);
  ModelParams p = params();
  FlowState s;
  s.mu = Field::sample(g, [](double x, double y) {
    return std::sqrt(2.0 + 0.3 * std::sin(2 * kPi * x) * std::cos(2 * kPi * y));
  });
  s.m = Field::vector(g);
  for (std::size_t q = 0; q < g.size(); ++q) {
    s.m(q, 0) = s.mu(q) * s.mu(q) * 0.3 * std::sin(2 * kPi * g.coord(q, 1));
    s.m(q, 1) = s.mu(q) * s.mu(q) * 0.2;
  }
  const TruncatedVelocity tv = truncated_velocity(ops, s, p, 1.5);
  CHECK((tv.grad_v_m - tv.grad_v_m_direct).max_abs() <= 1e-6);
}

TEST_CASE("cutoff limit recovers the velocity") {
  TorusGrid g(2, 16);
  DiffOps ops(g);
  ModelParams p = params();
  FlowState s = wavy(g, 0.5);
  const Field u = s.u(p.rho_floor);
  double prev = std::numeric_limits<double>::infinity();
  for (double m : {0.6, 0.9, 1.1, 2.0, 4.0}) {
    const double err = (truncated_velocity(ops, s, p, m).v_m - u).max_abs();
    CHECK(err <= prev);
    prev = err;
  }
  CHECK(prev == 0.0);
}

TEST_CASE("smoothed plateau and its primitive") {
  for (double z : {-1.0, -0.5, 0.0, 0.3, 1.0}) {
    CHECK(plateau(z) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(plateau_primitive(z) == doctest::Approx(z).epsilon(1e-14));
  }
  for (double z : {-3.0, -2.0, 2.0, 2.5}) CHECK(plateau(z) == 0.0);
  CHECK(plateau_primitive(2.0) == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(plateau_primitive(7.0) == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(plateau_primitive(-2.5) == doctest::Approx(-1.5).epsilon(1e-10));
  for (double z : {1.2, 1.5, 1.77, -1.3}) {
    const double h = 1e-5;
    CHECK(plateau(z) == doctest::Approx((plateau_primitive(z + h) - plateau_primitive(z - h)) / (2 * h)).epsilon(1e-7));
    CHECK(plateau_d1(z) == doctest::Approx((plateau(z + h) - plateau(z - h)) / (2 * h)).epsilon(1e-6));
    CHECK(plateau_d2(z) == doctest::Approx((plateau_d1(z + h) - plateau_d1(z - h)) / (2 * h)).epsilon(1e-5));
  }
  for (int k = 0; k <= 400; ++k) {
    const double z = -2.5 + 5.0 * k / 400.0;
    CHECK(plateau(z) >= -1e-15);
    CHECK(plateau(z) <= 1.0 + 1e-15);
    CHECK(plateau(-z) == doctest::Approx(plateau(z)).epsilon(1e-12));
  }
}

TEST_CASE("recovery family") {
  for (int axis : {0, 1}) {
    const RenormFn f = phi_n_family(3, axis, 2);
    for (double a : {-3.0, -1.2, 0.0, 2.9})
      for (double b : {-3.0, 0.4, 3.0}) {
        const double y[2] = {axis == 0 ? a : b, axis == 0 ? b : a};
        CHECK(f.phi(y) == doctest::Approx(y[axis]).epsilon(1e-14));
      }
    for (double b : {-6.0, 6.0, 7.5}) {
      const double y[2] = {axis == 0 ? 1.0 : b, axis == 0 ? b : 1.0};
      CHECK(f.phi(y) == 0.0);
    }
    const double y[2] = {4.1, -4.7};
    check_derivatives(f, y);
  }
  std::vector<double> ns, sups;
  for (int n : {1, 2, 4, 8, 16}) {
    const RenormFn f = phi_n_family(n, 0, 2);
    ns.push_back(n);
    sups.push_back(f.phi_second_sup);
  }
  const double C = sups[0] * ns[0];
  for (std::size_t i = 0; i < ns.size(); ++i) CHECK(sups[i] <= 1.02 * C / ns[i]);
  CHECK(fitted_slope(ns, sups) == doctest::Approx(-1.0).epsilon(0.02));
  CHECK_THROWS_AS(phi_n_family(0, 0, 2), std::invalid_argument);
  CHECK_THROWS_AS(phi_n_family(1, 2, 2), std::invalid_argument);
}

TEST_CASE("renormalizer derivatives") {
  const double y2[2] = {0.7, -1.3}, y1[1] = {0.9};
  check_derivatives(atan_renorm(0.5, 2), y2);
  check_derivatives(atan_renorm(2.0, 1), y1);
  check_derivatives(gaussian_damped_renorm(0.8, 2), y2);
  check_derivatives(gaussian_damped_renorm(1.5, 1), y1);
  check_derivatives(phi_n_family(2, 0, 1), y1);
  // atan: |phi''| peaks at 3 sqrt(3) / (8 a)
  CHECK(atan_renorm(0.5, 2).phi_second_sup == doctest::Approx(3.0 * std::sqrt(3.0) / 4.0).epsilon(1e-3));
  const double h[4] = {1.0, 2.0, 2.0, -2.0};
  CHECK(symmetric_operator_norm(h, 2) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("test function dictionary") {
  const auto dict = test_dictionary(0.1, 0.4, 2);
  REQUIRE(dict.size() == 12);
  TorusGrid g(2, 16);
  for (const auto& psi : dict) {
    CHECK(psi.time_factor(0.1) == 0.0);
    CHECK(psi.time_factor(0.4) == 0.0);
    CHECK(psi.time_factor(0.25) > 0.0);
    const double t = 0.17, h = 1e-6;
    CHECK(psi.time_factor_dt(t) ==
          doctest::Approx((psi.time_factor(t + h) - psi.time_factor(t - h)) / (2 * h)).epsilon(1e-6));
    DiffOps ops(g);
    CHECK((ops.grad(psi.space(g)) - psi.space_grad(g)).max_abs() < 1e-10);
  }
  CHECK(test_dictionary(0.0, 1.0, 1).size() == 12);
}

TEST_CASE("defects vanish for affine renormalizers and at rest") {
  TorusGrid g(2, 16);
  DiffOps ops(g);
  ModelParams p = params();
  const RenormFn aff = affine_renorm(0.3, {1.0, -2.0});
  const DefectFields d1 = defect_measures(ops, wavy(g, 0.5), p, {}, aff);
  CHECK(d1.R.max_abs() == 0.0);
  for (double v : d1.Rbar) CHECK(v == 0.0);
  const DefectFields d2 = defect_measures(ops, wavy(g, 0.0), p, {}, gaussian_damped_renorm(0.5, 2));
  CHECK(d2.R.max_abs() < 1e-14);
  for (double v : d2.Rbar) CHECK(std::abs(v) < 1e-14);
}

TEST_CASE("defects match an independent contraction") {
  TorusGrid g(2, 16);
  DiffOps ops(g);
  ModelParams p = params();
  FlowState s = wavy(g, 0.7);
  const RenormFn f = gaussian_damped_renorm(0.6, 2);
  const DefectFields df = defect_measures(ops, s, p, {}, f);
  const Field u = s.u(p.rho_floor);
  // G = phi''(u) grad u as a matrix product of fields, then contract against the stress
  Field H = Field::matrix(g);
  for (std::size_t q = 0; q < g.size(); ++q) {
    const double y[2] = {u(q, 0), u(q, 1)};
    double h[4];
    f.hess(y, h);
    for (int c = 0; c < 4; ++c) H(q, c) = h[c];
  }
  const Field J = ops.jacobian(u);
  Field G = Field::matrix(g);
  for (std::size_t q = 0; q < g.size(); ++q)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) G(q, i * 2 + j) = H(q, i * 2) * J(q, j) + H(q, i * 2 + 1) * J(q, 2 + j);
  const Field R = frobenius_inner(stress_tensor(ops, s, p, {}), G);
  CHECK((R - df.R).max_abs() < 1e-12 * std::max(1.0, R.max_abs()));
  const Field rho = s.rho();
  double worst = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
          worst = std::max(worst, std::abs(df.Rbar_at(q, i, j, k) + p.nu * rho(q) * u(q, k) * G(q, i * 2 + j)));
  CHECK(worst < 1e-14);
}

TEST_CASE("viscous renormalized relation holds for smooth states") {
  TorusGrid g(2, 64);
  DiffOps ops(g);
  ModelParams p = params();
  const FlowState s = wavy(g, 0.6);
  for (const RenormFn& f : {atan_renorm(0.5, 2), gaussian_damped_renorm(0.8, 2), phi_n_family(1, 1, 2)}) {
    double worst = 0.0;
    for (double v : viscous_renormalized_residual(ops, s, p, f)) worst = std::max(worst, std::abs(v));
    CHECK(worst < 1e-9);
  }
}

namespace {
Trajectory smooth_trajectory(int n, double dt, double t_end = 0.2) {
  TorusGrid g(2, n);
  DiffOps ops(g);
  StepConfig cfg;
  cfg.t_end = t_end;
  cfg.fixed_dt = dt;
  return evolve(ops, wavy(g, 0.5), params(), {}, cfg);
}
}  // namespace

TEST_CASE("weak residual on steady and smooth trajectories") {
  TorusGrid g(2, 16);
  DiffOps ops(g);
  ModelParams p = params();
  StepConfig cfg;
  cfg.t_end = 0.2;
  cfg.fixed_dt = 0.01;
  FlowState rest{0.0, Field::scalar(g, 1.0), Field::vector(g)};
  const Trajectory steady = evolve(ops, rest, p, {}, cfg);
  for (const TestFn& psi : test_dictionary(0.0, 0.2, 2)) {
    const WeakResidual w = weak_residual(ops, steady, psi);
    CHECK(std::abs(w.continuity) < 1e-14);
    for (double v : w.momentum) CHECK(std::abs(v) < 1e-14);
  }
  TestFn out_of_range{0.0, 0.3, 1, 0, 1.0, 0.0};
  CHECK_THROWS_AS(weak_residual(ops, steady, out_of_range), std::invalid_argument);

  const Trajectory a = smooth_trajectory(32, 1e-3), b = smooth_trajectory(64, 5e-4);
  DiffOps oa(a.states.front().grid()), ob(b.states.front().grid());
  double wa = 0.0, wb = 0.0;
  for (const TestFn& psi : test_dictionary(0.0, 0.2, 2)) {
    const WeakResidual ra = weak_residual(oa, a, psi), rb = weak_residual(ob, b, psi);
    wa = std::max({wa, std::abs(ra.continuity), std::abs(ra.momentum[0]), std::abs(ra.momentum[1])});
    wb = std::max({wb, std::abs(rb.continuity), std::abs(rb.momentum[0]), std::abs(rb.momentum[1])});
  }
  MESSAGE("weak residual sup over dictionary: " << wa << " -> " << wb);
  CHECK(wa < 1e-4);
  CHECK(2.0 * wb <= wa);

  TestFn c{0.0, 0.2, 1, 1, 1.0, 0.0}, s{0.0, 0.2, 1, 1, 0.0, 1.0}, cs{0.0, 0.2, 1, 1, 1.0, 1.0};
  const WeakResidual rc = weak_residual(oa, a, c), rs = weak_residual(oa, a, s), rcs = weak_residual(oa, a, cs);
  CHECK(std::abs(rcs.continuity - rc.continuity - rs.continuity) < 1e-15);
  for (int i = 0; i < 2; ++i)
    CHECK(std::abs(rcs.momentum[i] - rc.momentum[i] - rs.momentum[i]) < 1e-15);
}

TEST_CASE("renormalized residual") {
  const Trajectory tr = smooth_trajectory(32, 1e-3);
  DiffOps ops(tr.states.front().grid());
  const TestFn psi{0.0, 0.2, 1, 0, 1.0, 0.0};
  const WeakResidual w = weak_residual(ops, tr, psi);
  const DefectReport aff = renormalized_residual(ops, tr, affine_renorm(0.7, {2.0, -1.0}), psi, 1.0, 1.0, 1e-6);
  CHECK(aff.R_mass == 0.0);
  CHECK(aff.Rbar_mass == 0.0);
  CHECK(aff.pairing == 0.0);
  CHECK(std::abs(aff.lhs - (0.7 * w.continuity + 2.0 * w.momentum[0] - w.momentum[1])) < 1e-14);
  CHECK(aff.passes);

  for (const RenormFn& f : {atan_renorm(0.3, 2), gaussian_damped_renorm(0.5, 2)}) {
    const DefectReport r = renormalized_residual(ops, tr, f, psi, 1.0, 1e6, 1e-4);
    MESSAGE(f.name << ": lhs " << r.lhs << " pairing " << r.pairing << " R " << r.R_mass << " Rbar " << r.Rbar_mass);
    CHECK(r.R_mass > 0.0);
    CHECK(r.Rbar_mass > 0.0);
    CHECK(r.weak_residual < 1e-4);
    CHECK(r.passes);
  }
}

TEST_CASE("commutator table") {
  TorusGrid g(1, 1024);
  DiffOps ops(g);
  const std::vector<double> eps = {1.0 / 64, 1.0 / 8, 1.0 / 32, 1.0 / 16};
  const Field cg = Field::scalar(g, 2.0), ch = Field::scalar(g, -0.5);
  for (const auto& row : commutator_test(ops, cg, ch, 2.0, 2.0, eps).rows) CHECK(row.norm < 1e-12);

  const Field sg = Field::sample(g, [](double x, double) { return std::sin(2 * kPi * x); });
  const Field h = Field::sample(g, [](double x, double) { return std::tanh(40.0 * std::sin(6 * kPi * x)); });
  const CommutatorTable t = commutator_test(ops, sg, h, 2.0, 2.0, eps);
  REQUIRE(t.rows.size() == 4);
  CHECK(t.r == doctest::Approx(1.0));
  CHECK(t.rows.front().epsilon == 1.0 / 8);
  CHECK(t.monotone);
  CHECK(t.decay_exponent > 0.0);
  for (const auto& row : t.rows) CHECK(row.ratio <= commutator_kernel_constant(1));

  const CommutatorTable t3 = commutator_test(ops, sg, h * 3.0, 2.0, 2.0, eps);
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    CHECK(t3.rows[i].norm == doctest::Approx(3.0 * t.rows[i].norm).epsilon(1e-12));

  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(commutator_test(ops, sg, h, inf, inf, eps), std::invalid_argument);
  CHECK_THROWS_AS(commutator_test(ops, sg, h, 1.0, 1.5, eps), std::invalid_argument);
  CHECK(commutator_kernel_constant(2) == 3.0);
}
