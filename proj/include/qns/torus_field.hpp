#pragma once

// Uniform periodic grids on the unit d-torus (d = 1, 2), field containers,
// differential operators, mollifiers, quadrature and mixed norms.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qns {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

class TorusGrid {
 public:
  TorusGrid() = default;
  /// Throws std::invalid_argument unless dim is 1 or 2 and n >= 8 is a power of two.
  TorusGrid(int dim, int points_per_axis);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double spacing() const { return 1.0 / n_; }
  std::size_t size() const { return dim_ == 1 ? std::size_t(n_) : std::size_t(n_) * n_; }

  /// Points are stored row-major: p = ix * N + iy, x varying slowest.
  std::size_t index(int ix, int iy = 0) const {
    return dim_ == 1 ? std::size_t(wrap(ix)) : std::size_t(wrap(ix)) * n_ + wrap(iy);
  }
  int axis_index(std::size_t p, int axis) const {
    if (dim_ == 1) return int(p);
    return axis == 0 ? int(p / n_) : int(p % n_);
  }
  double coord(std::size_t p, int axis) const { return axis_index(p, axis) * spacing(); }

  int wrap(int i) const { return ((i % n_) + n_) % n_; }

  bool operator==(const TorusGrid&) const = default;

 private:
  int dim_ = 1;
  int n_ = 8;
};

/// Scalar (rank 0), vector (rank 1) or matrix (rank 2) field.
///
/// Storage is component-major: component c occupies the contiguous range
/// [c * points, (c + 1) * points). Matrix component (i, j) is c = i * d + j.
class Field {
 public:
  Field() = default;
  Field(const TorusGrid& grid, int rank, double fill = 0.0);

  static Field scalar(const TorusGrid& g, double fill = 0.0) { return Field(g, 0, fill); }
  static Field vector(const TorusGrid& g, double fill = 0.0) { return Field(g, 1, fill); }
  static Field matrix(const TorusGrid& g, double fill = 0.0) { return Field(g, 2, fill); }

  /// Samples fn(x, y) at every grid point (y = 0 when d = 1).
  static Field sample(const TorusGrid& g, const std::function<double(double, double)>& fn);

  const TorusGrid& grid() const { return grid_; }
  int rank() const { return rank_; }
  int dim() const { return grid_.dim(); }
  int components() const { return components_; }
  std::size_t points() const { return grid_.size(); }

  std::span<double> comp(int c) { return {data_.data() + c * points(), points()}; }
  std::span<const double> comp(int c) const { return {data_.data() + c * points(), points()}; }
  std::span<double> comp(int i, int j) { return comp(i * dim() + j); }
  std::span<const double> comp(int i, int j) const { return comp(i * dim() + j); }

  double& operator()(std::size_t p, int c = 0) { return data_[c * points() + p]; }
  double operator()(std::size_t p, int c = 0) const { return data_[c * points() + p]; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool finite() const;
  double max_abs() const;

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double a);
  /// this += a * o
  Field& axpy(double a, const Field& o);

  friend Field operator+(Field a, const Field& b) {
    a += b;
    return a;
  }
  friend Field operator-(Field a, const Field& b) {
    a -= b;
    return a;
  }
  friend Field operator*(double s, Field a) {
    a *= s;
    return a;
  }
  friend Field operator*(Field a, double s) {
    a *= s;
    return a;
  }

 private:
  TorusGrid grid_;
  int rank_ = 0;
  int components_ = 1;
  std::vector<double> data_;
};

// Pointwise helpers.
Field pointwise_product(const Field& scalar, const Field& f);
template <class Fn>
Field pointwise_map(const Field& s, Fn&& fn) {
  Field out = s;
  for (double& v : out.values()) v = fn(v);
  return out;
}
/// Pointwise |f|^2 (Euclidean for vectors, Frobenius for matrices).
Field squared_magnitude(const Field& f);
Field transpose(const Field& t);
Field symmetric_part(const Field& t);
Field antisymmetric_part(const Field& t);
Field trace(const Field& t);
/// Scalar field of sum_ij a_ij b_ij.
Field frobenius_inner(const Field& a, const Field& b);
/// Scalar field of sum_i a_i b_i.
Field dot(const Field& a, const Field& b);
/// Matrix field a_i b_j.
Field outer(const Field& a, const Field& b);

enum class Backend { spectral, fd4 };

std::string to_string(Backend b);
Backend backend_from_string(const std::string& s);

/// Periodic differential operators on one grid.
///
/// Spectral mode differentiates with FFTs (Nyquist mode dropped for odd
/// derivatives); fd4 uses fourth-order central differences. Instances hold
/// FFT work buffers and must not be shared between threads.
class DiffOps {
 public:
  DiffOps(const TorusGrid& grid, Backend backend = Backend::spectral);
  ~DiffOps();
  DiffOps(const DiffOps&) = delete;
  DiffOps& operator=(const DiffOps&) = delete;

  const TorusGrid& grid() const { return grid_; }
  Backend backend() const { return backend_; }

  Field grad(const Field& s) const;
  Field div(const Field& v) const;
  /// (div T)_i = sum_j d_j T_ij
  Field div_mat(const Field& t) const;
  /// J_ij = d_j v_i
  Field jacobian(const Field& v) const;
  /// J + J^T
  Field sym_jacobian(const Field& v) const;
  Field hessian(const Field& s) const;
  /// grad and hessian from one transform.
  std::pair<Field, Field> grad_hessian(const Field& s) const;
  Field laplacian(const Field& s) const;
  /// 2/3-rule truncation, applied per axis. Identity in fd4 mode.
  Field dealias(const Field& f) const;
  /// div_mat(t + c dealias(p)) with the truncation folded into the divergence.
  Field div_mat_dealiased(const Field& t, const Field& p, double c) const;

  /// Single partial derivative of one component.
  void partial(std::span<const double> in, int axis, std::span<double> out) const;

 private:
  struct Fft;
  void fd_first(std::span<const double> in, int axis, std::span<double> out) const;
  void fd_second(std::span<const double> in, int axis, std::span<double> out) const;

  TorusGrid grid_;
  Backend backend_;
  std::unique_ptr<Fft> fft_;
};

/// Radius-1 bump exp(-1/(1-|z|^2)), unnormalized.
double bump_profile(double r2);

struct MollifierSpec {
  double epsilon = 0.125;
};

/// Normalized, sampled kernel weights on the grid for radius epsilon.
/// Throws std::invalid_argument when epsilon < 2h.
struct MollifierKernel {
  std::vector<int> dx, dy;
  std::vector<double> w;
};
MollifierKernel mollifier_kernel(const TorusGrid& grid, const MollifierSpec& spec);

/// Spatial periodic convolution with the sampled unit-mass bump.
Field mollify(const Field& f, const MollifierSpec& spec);

/// Space-time mollification of a uniformly sampled series. Returns the
/// frames with index k satisfying t_k - eps >= t_0 and t_k + eps <= t_end;
/// `first_index` receives the index of the first returned frame.
std::vector<Field> mollify_series(std::span<const Field> frames, double dt, const MollifierSpec& spec,
                                  std::size_t* first_index = nullptr);

/// Mean over the unit torus (exact for trigonometric polynomials below Nyquist).
double integrate(const Field& s);
/// Spatial L^p norm of the pointwise magnitude; p = kInf gives the grid max.
double lp_norm(const Field& f, double p);

struct MixedNormSpec {
  double time_exponent = 2.0;
  double space_exponent = 2.0;
  double t0 = 0.0;
  double t1 = 1.0;
};

/// L^p(t0,t1; L^q) from per-time spatial norms, trapezoidal in time.
/// Throws std::invalid_argument on an empty window.
double mixed_norm_from_slices(std::span<const double> times, std::span<const double> spatial_norms,
                              const MixedNormSpec& spec);
double mixed_norm(std::span<const double> times, std::span<const Field> frames, const MixedNormSpec& spec);

/// Trapezoidal rule over (possibly nonuniform) samples.
double trapezoid(std::span<const double> times, std::span<const double> values);

// Field snapshot format: "QNSF", u16 version, u16 d, u32 N, u16 rank,
// u32 components, then little-endian f64 values, grid-point-major with the
// components of each point adjacent.
inline constexpr std::uint16_t kSnapshotVersion = 1;
void write_snapshot(std::ostream& os, const Field& f);
Field read_snapshot(std::istream& is);
void write_snapshot_file(const std::string& path, std::span<const Field> fields);
std::vector<Field> read_snapshot_file(const std::string& path);

}  // namespace qns
