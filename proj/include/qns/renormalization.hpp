#pragma once

// Cutoffs, renormalizing functions, defect measures, weak-form residuals and
// the mollifier commutator test.

#include "qns/dynamics.hpp"

#include <functional>
#include <string>
#include <vector>

namespace qns {

/// Five-piece density cutoff supported on [1/(2m), 2m]. Throws on y < 0.
double phi_m(double y, double m);
/// Derivative of phi_m, left-continuous at the breakpoints.
double phi_m_prime(double y, double m);

struct TruncatedVelocity {
  Field v_m;
  /// d_j (v_m)_i from phi_m(rho) T_nu / sqrt(nu rho) + 4 sqrt(rho) phi_m'(rho) rho^{1/4} u (x) grad rho^{1/4}.
  Field grad_v_m;
  /// d_j (phi_m(rho) u_i) by direct differentiation.
  Field grad_v_m_direct;
};

TruncatedVelocity truncated_velocity(const DiffOps& ops, const FlowState& s, const ModelParams& p, double m);

// Smoothed plateau Phi = 1 on [-1, 1], 0 outside [-2, 2], and its primitive.
double plateau(double z);
double plateau_d1(double z);
double plateau_d2(double z);
/// Odd primitive of the plateau; equals z on [-1, 1] and saturates at +-1.5.
double plateau_primitive(double z);

/// Scalar renormalizing function on R^d with gradient and Hessian (row-major d x d).
struct RenormFn {
  std::string name;
  int dim = 1;
  std::function<double(const double*)> phi;
  std::function<void(const double*, double*)> grad;
  std::function<void(const double*, double*)> hess;
  /// Sup over sampled points of the Hessian operator norm.
  double phi_second_sup = 0.0;
};

/// Largest |eigenvalue| of a symmetric d x d matrix (d = 1, 2).
double symmetric_operator_norm(const double* h, int dim);

/// Measures phi_second_sup on a uniform sample of [-half_width, half_width]^d.
void measure_second_sup(RenormFn& f, double half_width, int samples_per_axis = 401);

/// phi_n(y) = n Phi~(y_i / n) prod_{j != i} Phi(y_j / n); axis i is 0-based.
RenormFn phi_n_family(int n, int axis, int dim);
/// sum_i a atan(y_i / a)
RenormFn atan_renorm(double a, int dim);
/// y_0 exp(-|y|^2 / (2 b^2))
RenormFn gaussian_damped_renorm(double b, int dim);
/// c0 + sum_i c_i y_i
RenormFn affine_renorm(double c0, const std::vector<double>& c);

/// psi(t, x) = B((2t - t0 - t1) / (t1 - t0)) (a cos(2 pi k.x) + b sin(2 pi k.x)),
/// B the unit bump; vanishes outside (t0, t1).
struct TestFn {
  double t0 = 0.0, t1 = 1.0;
  int kx = 0, ky = 0;
  double a = 1.0, b = 0.0;

  double time_factor(double t) const;
  double time_factor_dt(double t) const;
  Field space(const TorusGrid& g) const;
  /// Spatial gradient of the trigonometric factor.
  Field space_grad(const TorusGrid& g) const;
};

/// Twelve fixed members on the window (t0, t1).
std::vector<TestFn> test_dictionary(double t0, double t1, int dim);

/// Scalar R_phi and rank-3 Rbar_phi (component (i, j, k) at c = (i d + j) d + k).
struct DefectFields {
  Field R;
  std::vector<double> Rbar;
  int dim = 1;
  std::size_t points = 0;
  double Rbar_at(std::size_t p, int i, int j, int k) const {
    return Rbar[((std::size_t(i) * dim + j) * dim + k) * points + p];
  }
};

DefectFields defect_measures(const DiffOps& ops, const FlowState& s, const ModelParams& p, const SourceTerms& src,
                             const RenormFn& phi);

/// sqrt(nu rho) phi'_i(u) d_j u_k - [nu d_j(rho phi'_i u_k) - 2 nu mu u_k phi'_i d_j mu] - Rbar_ijk,
/// the residual of the viscous renormalized relation.
std::vector<double> viscous_renormalized_residual(const DiffOps& ops, const FlowState& s, const ModelParams& p,
                                                  const RenormFn& phi);

struct WeakResidual {
  double continuity = 0.0;
  std::vector<double> momentum;
};

/// Space-time quadrature of the weak continuity and momentum identities.
/// Throws std::invalid_argument when psi's window leaves the trajectory.
WeakResidual weak_residual(const DiffOps& ops, const Trajectory& tr, const TestFn& psi);

struct DefectMasses {
  double R_mass = 0.0;
  double Rbar_mass = 0.0;
};

/// Space-time L1 masses of R_phi and |Rbar_phi| over the whole trajectory.
DefectMasses defect_masses(const DiffOps& ops, const Trajectory& tr, const RenormFn& phi);

struct DefectReport {
  double R_mass = 0.0;
  double Rbar_mass = 0.0;
  double phi_second_sup = 0.0;
  double M_r = 0.0;
  double C_bar = 0.0;
  double bound = 0.0;
  /// Renormalized weak-form left side and the pairing <R_phi, psi>.
  double lhs = 0.0;
  double pairing = 0.0;
  double weak_residual = 0.0;
  bool passes = false;
};

DefectReport renormalized_residual(const DiffOps& ops, const Trajectory& tr, const RenormFn& phi,
                                   const TestFn& psi, double M_r, double C_bar, double tol);

struct CommutatorRow {
  double epsilon = 0.0;
  double norm = 0.0;
  double ratio = 0.0;  // norm / (||dg||_p ||h||_q)
};

struct CommutatorTable {
  double p = 2.0, q = 2.0, r = 1.0;
  std::vector<CommutatorRow> rows;
  double decay_exponent = 0.0;
  bool monotone = false;
};

/// || mollify(d(g h)) - d(g mollify(h)) ||_{L^r} along axis 0, 1/r = 1/p + 1/q.
/// Throws std::invalid_argument when r would be infinite or 1/p + 1/q > 1.
CommutatorTable commutator_test(const DiffOps& ops, const Field& g, const Field& h, double p, double q,
                                const std::vector<double>& epsilons);

/// 1 + d, from the kernel moment integral of |z| |grad eta|.
double commutator_kernel_constant(int dim);

}  // namespace qns
