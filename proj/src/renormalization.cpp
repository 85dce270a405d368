#include "qns/renormalization.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace qns {

// ------------------------------------------------------------------ phi_m

double phi_m(double y, double m) {
  if (y < 0.0) throw std::invalid_argument("phi_m: negative argument");
  if (!(m > 0.0)) throw std::invalid_argument("phi_m: m must be positive");
  if (y <= 1.0 / (2.0 * m)) return 0.0;
  if (y <= 1.0 / m) return 2.0 * m * y - 1.0;
  if (y <= m) return 1.0;
  if (y <= 2.0 * m) return 2.0 - y / m;
  return 0.0;
}

double phi_m_prime(double y, double m) {
  if (y < 0.0) throw std::invalid_argument("phi_m_prime: negative argument");
  if (!(m > 0.0)) throw std::invalid_argument("phi_m_prime: m must be positive");
  if (y <= 1.0 / (2.0 * m)) return 0.0;
  if (y <= 1.0 / m) return 2.0 * m;
  if (y <= m) return 0.0;
  if (y <= 2.0 * m) return -1.0 / m;
  return 0.0;
}

TruncatedVelocity truncated_velocity(const DiffOps& ops, const FlowState& s, const ModelParams& p, double m) {
  check_floor(s.mu, p.rho_floor);
  const TorusGrid& g = s.grid();
  const int d = g.dim();
  const Field u = s.u(p.rho_floor);
  const Field phi = pointwise_map(s.mu, [m](double v) { return phi_m(v * v, m); });
  const Field dphi = pointwise_map(s.mu, [m](double v) { return phi_m_prime(v * v, m); });
  TruncatedVelocity out;
  out.v_m = pointwise_product(phi, u);

  const StressBundle b = viscous_tensor(ops, s.mu, u, p);
  const Field q = pointwise_map(s.mu, [](double v) { return std::sqrt(v); });  // rho^{1/4}
  const Field gq = ops.grad(q);
  out.grad_v_m = Field::matrix(g);
  for (std::size_t pt = 0; pt < g.size(); ++pt) {
    const double mu = s.mu(pt);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        out.grad_v_m(pt, i * d + j) = phi(pt) * b.T_nu(pt, i * d + j) / (std::sqrt(p.nu) * mu) +
                                      4.0 * mu * dphi(pt) * q(pt) * u(pt, i) * gq(pt, j);
  }
  out.grad_v_m_direct = ops.jacobian(out.v_m);
  return out;
}

// ---------------------------------------------------------------- plateau

namespace {

// Unit-mass bump of radius 1/2: eta_half(x) = 2 eta(2x).
class PlateauTables {
 public:
  static const PlateauTables& get() {
    static const PlateauTables t;
    return t;
  }

  double eta_half(double x) const { return std::abs(x) < 0.5 ? 2.0 * bump_profile(4.0 * x * x) / z_ : 0.0; }
  double eta_half_d1(double x) const {
    if (std::abs(x) >= 0.5) return 0.0;
    const double s = 4.0 * x * x, w = 1.0 - s;
    // d/dx exp(-1/(1-4x^2)) = exp(..) * (-8x / (1-4x^2)^2)
    return 2.0 * bump_profile(s) * (-8.0 * x / (w * w)) / z_;
  }
  double H(double x) const {
    if (x <= -0.5) return 0.0;
    if (x >= 0.5) return 1.0;
    return hermite(h_, x, [this](double v) { return eta_half(v); });
  }
  double G(double x) const {
    if (x <= -0.5) return 0.0;
    if (x >= 0.5) return x;
    return hermite(g_, x, [this](double v) { return H(v); });
  }

 private:
  static constexpr int kNodes = 4000;
  static constexpr double kLo = -0.5, kHi = 0.5;

  PlateauTables() {
    // 5-point Gauss-Legendre per cell.
    const std::array<double, 5> xg = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                      0.9061798459386640};
    const std::array<double, 5> wg = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                      0.4786286704993665, 0.2369268850561891};
    const double dx = (kHi - kLo) / kNodes;
    auto cell = [&](double a, const auto& f) {
      double acc = 0.0;
      for (int k = 0; k < 5; ++k) acc += wg[k] * f(a + 0.5 * dx * (1.0 + xg[k]));
      return 0.5 * dx * acc;
    };
    auto raw = [](double x) { return 2.0 * bump_profile(4.0 * x * x); };
    z_ = 1.0;
    double total = 0.0;
    for (int i = 0; i < kNodes; ++i) total += cell(kLo + i * dx, raw);
    z_ = total;
    h_.assign(kNodes + 1, 0.0);
    for (int i = 0; i < kNodes; ++i) h_[i + 1] = h_[i] + cell(kLo + i * dx, [this](double v) { return eta_half(v); });
    g_.assign(kNodes + 1, 0.0);
    for (int i = 0; i < kNodes; ++i) g_[i + 1] = g_[i] + cell(kLo + i * dx, [this](double v) { return H(v); });
  }

  template <class D>
  static double hermite(const std::vector<double>& tab, double x, const D& deriv) {
    const double dx = (kHi - kLo) / kNodes;
    const double s = (x - kLo) / dx;
    const int i = std::clamp(int(s), 0, kNodes - 1);
    const double t = s - i;
    const double x0 = kLo + i * dx, x1 = x0 + dx;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    return h00 * tab[i] + h10 * dx * deriv(x0) + h01 * tab[i + 1] + h11 * dx * deriv(x1);
  }

  double z_ = 1.0;
  std::vector<double> h_, g_;
};

}  // namespace

double plateau(double z) {
  const auto& t = PlateauTables::get();
  return t.H(z + 1.5) - t.H(z - 1.5);
}

double plateau_d1(double z) {
  const auto& t = PlateauTables::get();
  return t.eta_half(z + 1.5) - t.eta_half(z - 1.5);
}

double plateau_d2(double z) {
  const auto& t = PlateauTables::get();
  return t.eta_half_d1(z + 1.5) - t.eta_half_d1(z - 1.5);
}

double plateau_primitive(double z) {
  if (z < 0.0) return -plateau_primitive(-z);
  if (z <= 1.0) return z;
  return z - PlateauTables::get().G(z - 1.5);
}

// ------------------------------------------------------- renormalizers

double symmetric_operator_norm(const double* h, int dim) {
  if (dim == 1) return std::abs(h[0]);
  const double mean = 0.5 * (h[0] + h[3]), half = 0.5 * (h[0] - h[3]);
  return std::abs(mean) + std::sqrt(half * half + h[1] * h[1]);
}

void measure_second_sup(RenormFn& f, double half_width, int samples_per_axis) {
  const int d = f.dim;
  double sup = 0.0;
  std::array<double, 2> y{};
  std::array<double, 4> hs{};
  const int ny = d == 2 ? samples_per_axis : 1;
  for (int a = 0; a < samples_per_axis; ++a)
    for (int b = 0; b < ny; ++b) {
      y[0] = -half_width + 2.0 * half_width * a / (samples_per_axis - 1);
      if (d == 2) y[1] = -half_width + 2.0 * half_width * b / (samples_per_axis - 1);
      f.hess(y.data(), hs.data());
      sup = std::max(sup, symmetric_operator_norm(hs.data(), d));
    }
  f.phi_second_sup = sup;
}

RenormFn phi_n_family(int n, int axis, int dim) {
  if (n < 1) throw std::invalid_argument("phi_n_family: n must be >= 1");
  if (axis < 0 || axis >= dim) throw std::invalid_argument("phi_n_family: axis out of range");
  RenormFn f;
  f.name = "phi_n(" + std::to_string(n) + ")";
  f.dim = dim;
  const double nn = n;
  const int other = 1 - axis;
  f.phi = [=](const double* y) {
    double v = nn * plateau_primitive(y[axis] / nn);
    if (dim == 2) v *= plateau(y[other] / nn);
    return v;
  };
  f.grad = [=](const double* y, double* g) {
    const double a = y[axis] / nn;
    if (dim == 1) {
      g[0] = plateau(a);
      return;
    }
    const double b = y[other] / nn;
    g[axis] = plateau(a) * plateau(b);
    g[other] = plateau_primitive(a) * plateau_d1(b);
  };
  f.hess = [=](const double* y, double* h) {
    const double a = y[axis] / nn;
    if (dim == 1) {
      h[0] = plateau_d1(a) / nn;
      return;
    }
    const double b = y[other] / nn;
    h[axis * 2 + axis] = plateau_d1(a) * plateau(b) / nn;
    h[axis * 2 + other] = h[other * 2 + axis] = plateau(a) * plateau_d1(b) / nn;
    h[other * 2 + other] = plateau_primitive(a) * plateau_d2(b) / nn;
  };
  measure_second_sup(f, 2.5 * nn);
  return f;
}

RenormFn atan_renorm(double a, int dim) {
  RenormFn f;
  f.name = "atan(" + std::to_string(a) + ")";
  f.dim = dim;
  f.phi = [=](const double* y) {
    double v = 0.0;
    for (int i = 0; i < dim; ++i) v += a * std::atan(y[i] / a);
    return v;
  };
  f.grad = [=](const double* y, double* g) {
    for (int i = 0; i < dim; ++i) g[i] = 1.0 / (1.0 + (y[i] / a) * (y[i] / a));
  };
  f.hess = [=](const double* y, double* h) {
    for (int i = 0; i < dim * dim; ++i) h[i] = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double s = y[i] / a, w = 1.0 + s * s;
      h[i * dim + i] = -2.0 * s / (a * w * w);
    }
  };
  measure_second_sup(f, 5.0 * a);
  return f;
}

RenormFn gaussian_damped_renorm(double b, int dim) {
  RenormFn f;
  f.name = "gauss(" + std::to_string(b) + ")";
  f.dim = dim;
  auto r2 = [=](const double* y) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) s += y[i] * y[i];
    return s;
  };
  f.phi = [=](const double* y) { return y[0] * std::exp(-r2(y) / (2 * b * b)); };
  f.grad = [=](const double* y, double* g) {
    const double e = std::exp(-r2(y) / (2 * b * b));
    for (int i = 0; i < dim; ++i) g[i] = ((i == 0 ? 1.0 : 0.0) - y[0] * y[i] / (b * b)) * e;
  };
  f.hess = [=](const double* y, double* h) {
    const double e = std::exp(-r2(y) / (2 * b * b)), b2 = b * b;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        const double di0 = i == 0, dj0 = j == 0, dij = i == j;
        // d_i d_j [y0 e] with d_i e = -y_i e / b2
        h[i * dim + j] = e * (-(di0 * y[j] + dj0 * y[i] + dij * y[0]) / b2 + y[0] * y[i] * y[j] / (b2 * b2));
      }
  };
  measure_second_sup(f, 5.0 * b);
  return f;
}

RenormFn affine_renorm(double c0, const std::vector<double>& c) {
  RenormFn f;
  f.name = "affine";
  f.dim = int(c.size());
  const int dim = f.dim;
  f.phi = [=](const double* y) {
    double v = c0;
    for (int i = 0; i < dim; ++i) v += c[i] * y[i];
    return v;
  };
  f.grad = [=](const double*, double* g) {
    for (int i = 0; i < dim; ++i) g[i] = c[i];
  };
  f.hess = [=](const double*, double* h) {
    for (int i = 0; i < dim * dim; ++i) h[i] = 0.0;
  };
  f.phi_second_sup = 0.0;
  return f;
}

// --------------------------------------------------------- test functions

double TestFn::time_factor(double t) const {
  const double s = (2.0 * t - t0 - t1) / (t1 - t0);
  return bump_profile(s * s);
}

double TestFn::time_factor_dt(double t) const {
  const double s = (2.0 * t - t0 - t1) / (t1 - t0);
  if (std::abs(s) >= 1.0) return 0.0;
  const double w = 1.0 - s * s;
  return bump_profile(s * s) * (-2.0 * s / (w * w)) * 2.0 / (t1 - t0);
}

Field TestFn::space(const TorusGrid& g) const {
  return Field::sample(g, [this](double x, double y) {
    const double ph = 2.0 * kPi * (kx * x + ky * y);
    return a * std::cos(ph) + b * std::sin(ph);
  });
}

Field TestFn::space_grad(const TorusGrid& g) const {
  Field out = Field::vector(g);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double x = g.coord(p, 0), y = g.dim() == 2 ? g.coord(p, 1) : 0.0;
    const double ph = 2.0 * kPi * (kx * x + ky * y);
    const double dphase = -a * std::sin(ph) + b * std::cos(ph);
    out(p, 0) = 2.0 * kPi * kx * dphase;
    if (g.dim() == 2) out(p, 1) = 2.0 * kPi * ky * dphase;
  }
  return out;
}

std::vector<TestFn> test_dictionary(double t0, double t1, int dim) {
  std::vector<std::array<int, 2>> modes;
  if (dim == 1) {
    modes = {{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}};
  } else {
    modes = {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 1}};
  }
  std::vector<TestFn> out;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    TestFn c{t0, t1, modes[i][0], modes[i][1], 1.0, 0.0};
    TestFn s{t0, t1, modes[i][0], modes[i][1], 0.0, 1.0};
    if (modes[i][0] == 0 && modes[i][1] == 0) {
      s = c;
      s.a = 2.0;  // second constant-mode member with a different amplitude
    }
    out.push_back(c);
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------- defects

namespace {

struct PointwisePhi {
  Field value;                // phi(u)
  Field grad;                 // phi'(u), vector
  std::vector<double> hess;   // phi''(u), (i, l) at (i d + l) * points + p
};

PointwisePhi evaluate_phi(const Field& u, const RenormFn& phi) {
  const int d = u.dim();
  if (phi.dim != d) throw std::invalid_argument("renormalizer dimension does not match the grid");
  PointwisePhi out{Field::scalar(u.grid()), Field::vector(u.grid()), std::vector<double>(std::size_t(d * d) * u.points())};
  std::array<double, 2> y{}, g{};
  std::array<double, 4> h{};
  for (std::size_t p = 0; p < u.points(); ++p) {
    for (int i = 0; i < d; ++i) y[i] = u(p, i);
    out.value(p) = phi.phi(y.data());
    phi.grad(y.data(), g.data());
    phi.hess(y.data(), h.data());
    for (int i = 0; i < d; ++i) out.grad(p, i) = g[i];
    for (int c = 0; c < d * d; ++c) out.hess[c * u.points() + p] = h[c];
  }
  return out;
}

}  // namespace

DefectFields defect_measures(const DiffOps& ops, const FlowState& s, const ModelParams& p, const SourceTerms& src,
                             const RenormFn& phi) {
  check_floor(s.mu, p.rho_floor);
  const TorusGrid& g = s.grid();
  const int d = g.dim();
  const std::size_t np = g.size();
  const Field u = s.u(p.rho_floor);
  const Field J = ops.jacobian(u);  // J(l, j) = d_j u_l
  const PointwisePhi ph = evaluate_phi(u, phi);
  // Stress divided by mu: 2 sqrt(nu) S_nu + 2 sqrt(kappa) S_kappa + sqrt(kappa) M.
  Field sigma = stress_tensor(ops, s, p, src);
  for (int c = 0; c < sigma.components(); ++c)
    for (std::size_t q = 0; q < np; ++q) sigma(q, c) /= s.mu(q);

  DefectFields out;
  out.dim = d;
  out.points = np;
  out.R = Field::scalar(g);
  out.Rbar.assign(std::size_t(d * d * d) * np, 0.0);
  for (std::size_t q = 0; q < np; ++q) {
    const double mu = s.mu(q);
    double r = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        // d_j phi'_i(u) = sum_l phi''_il d_j u_l
        double dj_dphi_i = 0.0;
        for (int l = 0; l < d; ++l) dj_dphi_i += ph.hess[(i * d + l) * np + q] * J(q, l * d + j);
        r += mu * dj_dphi_i * sigma(q, i * d + j);
        for (int k = 0; k < d; ++k)
          out.Rbar[((std::size_t(i) * d + j) * d + k) * np + q] = -p.nu * mu * mu * u(q, k) * dj_dphi_i;
      }
    out.R(q) = r;
  }
  return out;
}

std::vector<double> viscous_renormalized_residual(const DiffOps& ops, const FlowState& s, const ModelParams& p,
                                                  const RenormFn& phi) {
  const TorusGrid& g = s.grid();
  const int d = g.dim();
  const std::size_t np = g.size();
  const Field u = s.u(p.rho_floor);
  const PointwisePhi ph = evaluate_phi(u, phi);
  const StressBundle b = viscous_tensor(ops, s.mu, u, p);
  const DefectFields df = defect_measures(ops, s, p, SourceTerms{}, phi);
  const Field rho = s.rho();
  const Field gmu = ops.grad(s.mu);
  std::vector<double> res(std::size_t(d * d * d) * np);
  std::vector<double> prod(np), dprod(np);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) {
      for (std::size_t q = 0; q < np; ++q) prod[q] = rho(q) * ph.grad(q, i) * u(q, k);
      for (int j = 0; j < d; ++j) {
        ops.partial(prod, j, dprod);
        for (std::size_t q = 0; q < np; ++q) {
          // sqrt(nu rho) phi'_i (T_nu)_{jk}, with (T_nu)_{jk} = sqrt(nu) mu d_j u_k
          const double lhs = std::sqrt(p.nu) * s.mu(q) * ph.grad(q, i) * b.T_nu(q, k * d + j);
          const double rhs = p.nu * dprod[q] - 2.0 * p.nu * s.mu(q) * u(q, k) * ph.grad(q, i) * gmu(q, j);
          res[((std::size_t(i) * d + j) * d + k) * np + q] = lhs - rhs - df.Rbar_at(q, i, j, k);
        }
      }
    }
  return res;
}

namespace {

void check_window(const Trajectory& tr, const TestFn& psi) {
  if (tr.states.size() < 2) throw std::invalid_argument("weak residual: trajectory needs at least two states");
  const double tf = tr.states.front().t, tl = tr.states.back().t;
  const double tol = 1e-12 * std::max(1.0, std::abs(tl));
  if (!(psi.t1 > psi.t0) || psi.t0 < tf - tol || psi.t1 > tl + tol)
    throw std::invalid_argument("weak residual: test function window leaves the trajectory");
}

}  // namespace

WeakResidual weak_residual(const DiffOps& ops, const Trajectory& tr, const TestFn& psi) {
  check_window(tr, psi);
  const TorusGrid& g = ops.grid();
  const int d = g.dim();
  const Field P = psi.space(g);
  const Field gP = psi.space_grad(g);
  const auto times = tr.times();
  std::vector<double> cont(times.size());
  std::vector<std::vector<double>> mom(d, std::vector<double>(times.size()));
  for (std::size_t k = 0; k < times.size(); ++k) {
    const FlowState& s = tr.states[k];
    const double B = psi.time_factor(s.t), dB = psi.time_factor_dt(s.t);
    if (B == 0.0 && dB == 0.0) continue;
    cont[k] = dB * integrate(pointwise_product(s.rho(), P)) + B * integrate(dot(s.m, gP));
    const Field flux = momentum_flux(ops, s, tr.params, tr.sources) * -1.0;  // m (x) u - stress
    const Field F = assemble_force_F(ops, s.mu, s.m, tr.params, tr.sources, s.t);
    for (int i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t q = 0; q < g.size(); ++q) {
        double fl = 0.0;
        for (int j = 0; j < d; ++j) fl += flux(q, i * d + j) * gP(q, j);
        acc += dB * s.m(q, i) * P(q) + B * fl + B * F(q, i) * P(q);
      }
      mom[i][k] = acc / double(g.size());
    }
  }
  WeakResidual out;
  out.continuity = trapezoid(times, cont);
  for (int i = 0; i < d; ++i) out.momentum.push_back(trapezoid(times, mom[i]));
  return out;
}

DefectMasses defect_masses(const DiffOps& ops, const Trajectory& tr, const RenormFn& phi) {
  const auto times = tr.times();
  std::vector<double> rm(times.size()), rbm(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const DefectFields df = defect_measures(ops, tr.states[k], tr.params, tr.sources, phi);
    const int d = df.dim;
    double a = 0.0, b = 0.0;
    for (std::size_t q = 0; q < df.points; ++q) {
      a += std::abs(df.R(q));
      double s2 = 0.0;
      for (int c = 0; c < d * d * d; ++c) s2 += df.Rbar[c * df.points + q] * df.Rbar[c * df.points + q];
      b += std::sqrt(s2);
    }
    rm[k] = a / double(df.points);
    rbm[k] = b / double(df.points);
  }
  return {trapezoid(times, rm), trapezoid(times, rbm)};
}

DefectReport renormalized_residual(const DiffOps& ops, const Trajectory& tr, const RenormFn& phi,
                                   const TestFn& psi, double M_r, double C_bar, double tol) {
  check_window(tr, psi);
  const TorusGrid& g = ops.grid();
  const int d = g.dim();
  const Field P = psi.space(g);
  const Field gP = psi.space_grad(g);
  const auto times = tr.times();
  std::vector<double> lhs(times.size()), pair(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const FlowState& s = tr.states[k];
    const double B = psi.time_factor(s.t), dB = psi.time_factor_dt(s.t);
    if (B == 0.0 && dB == 0.0) continue;
    const Field u = s.u(tr.params.rho_floor);
    const PointwisePhi ph = evaluate_phi(u, phi);
    const Field stress = stress_tensor(ops, s, tr.params, tr.sources);
    const Field F = assemble_force_F(ops, s.mu, s.m, tr.params, tr.sources, s.t);
    const DefectFields df = defect_measures(ops, s, tr.params, tr.sources, phi);
    double acc = 0.0, pr = 0.0;
    for (std::size_t q = 0; q < g.size(); ++q) {
      const double rho = s.mu(q) * s.mu(q);
      double term = dB * rho * ph.value(q) * P(q);
      for (int j = 0; j < d; ++j) {
        double flux_j = rho * ph.value(q) * u(q, j);
        for (int i = 0; i < d; ++i) flux_j -= stress(q, i * d + j) * ph.grad(q, i);
        term += B * flux_j * gP(q, j);
      }
      for (int i = 0; i < d; ++i) term += B * F(q, i) * ph.grad(q, i) * P(q);
      acc += term;
      pr += B * df.R(q) * P(q);
    }
    lhs[k] = acc / double(g.size());
    pair[k] = pr / double(g.size());
  }
  DefectReport rep;
  const DefectMasses masses = defect_masses(ops, tr, phi);
  rep.R_mass = masses.R_mass;
  rep.Rbar_mass = masses.Rbar_mass;
  rep.phi_second_sup = phi.phi_second_sup;
  rep.M_r = M_r;
  rep.C_bar = C_bar;
  rep.bound = C_bar * phi.phi_second_sup * M_r;
  rep.lhs = trapezoid(times, lhs);
  rep.pairing = trapezoid(times, pair);
  rep.weak_residual = std::abs(rep.lhs - rep.pairing);
  rep.passes = rep.R_mass + rep.Rbar_mass <= rep.bound * (1.0 + 1e-9) + 1e-300 && rep.weak_residual <= tol;
  return rep;
}

// ------------------------------------------------------------- commutator

double commutator_kernel_constant(int dim) { return 1.0 + dim; }

CommutatorTable commutator_test(const DiffOps& ops, const Field& g, const Field& h, double p, double q,
                                const std::vector<double>& epsilons) {
  const double inv_r = 1.0 / p + 1.0 / q;
  if (inv_r <= 0.0) throw std::invalid_argument("commutator: r = infinity is not admissible");
  if (inv_r > 1.0 + 1e-15) throw std::invalid_argument("commutator: need 1/p + 1/q <= 1");
  CommutatorTable tab;
  tab.p = p;
  tab.q = q;
  tab.r = 1.0 / inv_r;
  const std::size_t np = g.points();
  std::vector<double> dg(np);
  ops.partial(g.comp(0), 0, dg);
  Field dgf = Field::scalar(g.grid());
  std::ranges::copy(dg, dgf.comp(0).begin());
  const double scale = lp_norm(dgf, p) * lp_norm(h, q);
  const Field gh = pointwise_product(g, h);
  std::vector<double> eps_sorted = epsilons;
  std::sort(eps_sorted.begin(), eps_sorted.end(), std::greater<>());
  std::vector<double> xs, ys;
  for (double eps : eps_sorted) {
    const Field diff = mollify(gh, {eps}) - pointwise_product(g, mollify(h, {eps}));
    Field c = Field::scalar(g.grid());
    ops.partial(diff.comp(0), 0, c.comp(0));
    CommutatorRow row;
    row.epsilon = eps;
    row.norm = lp_norm(c, tab.r);
    row.ratio = scale > 0.0 ? row.norm / scale : 0.0;
    tab.rows.push_back(row);
    if (row.norm > 0.0) {
      xs.push_back(eps);
      ys.push_back(row.norm);
    }
  }
  tab.monotone = true;
  for (std::size_t i = 1; i < tab.rows.size(); ++i)
    if (!(tab.rows[i].norm < tab.rows[i - 1].norm)) tab.monotone = false;
  tab.decay_exponent = xs.size() >= 2 ? fitted_slope(xs, ys) : 0.0;
  return tab;
}

}  // namespace qns
