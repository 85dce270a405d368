#include "qns/torus_field.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <stdexcept>

namespace qns {

// ---------------------------------------------------------------- TorusGrid

TorusGrid::TorusGrid(int dim, int points_per_axis) : dim_(dim), n_(points_per_axis) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("TorusGrid: dim must be 1 or 2");
  if (points_per_axis < 8 || !std::has_single_bit(unsigned(points_per_axis)))
    throw std::invalid_argument("TorusGrid: points per axis must be a power of two >= 8");
}

// -------------------------------------------------------------------- Field

Field::Field(const TorusGrid& grid, int rank, double fill) : grid_(grid), rank_(rank) {
  if (rank < 0 || rank > 2) throw std::invalid_argument("Field: rank must be 0, 1 or 2");
  components_ = rank == 0 ? 1 : (rank == 1 ? grid.dim() : grid.dim() * grid.dim());
  data_.assign(std::size_t(components_) * grid.size(), fill);
}

Field Field::sample(const TorusGrid& g, const std::function<double(double, double)>& fn) {
  Field f(g, 0);
  for (std::size_t p = 0; p < g.size(); ++p)
    f.data_[p] = fn(g.coord(p, 0), g.dim() == 2 ? g.coord(p, 1) : 0.0);
  return f;
}

bool Field::finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Field::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

static void require_same_shape(const Field& a, const Field& b) {
  if (a.grid() != b.grid() || a.rank() != b.rank())
    throw std::invalid_argument("Field: shape mismatch");
}

Field& Field::operator+=(const Field& o) {
  require_same_shape(*this, o);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Field& Field::operator-=(const Field& o) {
  require_same_shape(*this, o);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Field& Field::operator*=(double a) {
  for (double& v : data_) v *= a;
  return *this;
}

Field& Field::axpy(double a, const Field& o) {
  require_same_shape(*this, o);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * o.data_[i];
  return *this;
}

Field pointwise_product(const Field& s, const Field& f) {
  if (s.rank() != 0 || s.grid() != f.grid()) throw std::invalid_argument("pointwise_product: need scalar on same grid");
  Field out = f;
  for (int c = 0; c < f.components(); ++c) {
    auto oc = out.comp(c);
    auto sc = s.comp(0);
    for (std::size_t p = 0; p < oc.size(); ++p) oc[p] *= sc[p];
  }
  return out;
}

Field squared_magnitude(const Field& f) {
  Field out = Field::scalar(f.grid());
  for (int c = 0; c < f.components(); ++c) {
    auto fc = f.comp(c);
    for (std::size_t p = 0; p < fc.size(); ++p) out(p) += fc[p] * fc[p];
  }
  return out;
}

Field transpose(const Field& t) {
  Field out(t.grid(), 2);
  const int d = t.dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) std::ranges::copy(t.comp(j, i), out.comp(i, j).begin());
  return out;
}

Field symmetric_part(const Field& t) {
  Field out = t + transpose(t);
  out *= 0.5;
  return out;
}

Field antisymmetric_part(const Field& t) {
  Field out = t - transpose(t);
  out *= 0.5;
  return out;
}

Field trace(const Field& t) {
  Field out = Field::scalar(t.grid());
  for (int i = 0; i < t.dim(); ++i) {
    auto c = t.comp(i, i);
    for (std::size_t p = 0; p < c.size(); ++p) out(p) += c[p];
  }
  return out;
}

Field frobenius_inner(const Field& a, const Field& b) {
  require_same_shape(a, b);
  Field out = Field::scalar(a.grid());
  for (int c = 0; c < a.components(); ++c) {
    auto ac = a.comp(c);
    auto bc = b.comp(c);
    for (std::size_t p = 0; p < ac.size(); ++p) out(p) += ac[p] * bc[p];
  }
  return out;
}

Field dot(const Field& a, const Field& b) { return frobenius_inner(a, b); }

Field outer(const Field& a, const Field& b) {
  Field out(a.grid(), 2);
  const int d = a.dim();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      auto o = out.comp(i, j);
      auto ai = a.comp(i);
      auto bj = b.comp(j);
      for (std::size_t p = 0; p < o.size(); ++p) o[p] = ai[p] * bj[p];
    }
  return out;
}

std::string to_string(Backend b) { return b == Backend::spectral ? "spectral" : "fd4"; }

Backend backend_from_string(const std::string& s) {
  if (s == "spectral") return Backend::spectral;
  if (s == "fd4") return Backend::fd4;
  throw std::invalid_argument("unknown backend '" + s + "'");
}

// ------------------------------------------------------------------ DiffOps

namespace {
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

namespace {
// c * (i k) without the general complex product.
inline std::complex<double> times_ik(std::complex<double> c, double k) { return {-k * c.imag(), k * c.real()}; }
}  // namespace

struct DiffOps::Fft {
  using cplx = std::complex<double>;

  explicit Fft(const TorusGrid& g) : n(g.n()), dim(g.dim()) {
    const int half = n / 2 + 1;
    ncomplex = dim == 1 ? std::size_t(half) : std::size_t(n) * half;
    nreal = g.size();
    real = fftw_alloc_real(nreal);
    spec = fftw_alloc_complex(ncomplex);
    {
      std::lock_guard lock(fftw_planner_mutex());
      int dims[2] = {n, n};
      fwd = fftw_plan_dft_r2c(dim, dims, real, spec, FFTW_ESTIMATE);
      inv = fftw_plan_dft_c2r(dim, dims, spec, real, FFTW_ESTIMATE);
    }
    kx.resize(ncomplex);
    ky.resize(ncomplex, 0);
    ikx.resize(ncomplex);
    iky.resize(ncomplex, 0.0);
    for (std::size_t q = 0; q < ncomplex; ++q) {
      if (dim == 1) {
        kx[q] = int(q);
      } else {
        const int i0 = int(q / half);
        kx[q] = i0 <= n / 2 ? i0 : i0 - n;
        ky[q] = int(q % half);
      }
      ikx[q] = std::abs(kx[q]) == n / 2 ? 0.0 : 2.0 * kPi * kx[q];
      iky[q] = std::abs(ky[q]) == n / 2 ? 0.0 : 2.0 * kPi * ky[q];
    }
  }

  ~Fft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    fftw_free(real);
    fftw_free(spec);
  }

  int k(std::size_t q, int axis) const { return axis == 0 ? kx[q] : ky[q]; }

  // First-derivative multiplier along axis (imaginary part only).
  double ik(std::size_t q, int axis) const { return axis == 0 ? ikx[q] : iky[q]; }

  bool kept(std::size_t q, int cutoff) const {
    return std::abs(kx[q]) <= cutoff && (dim == 1 || std::abs(ky[q]) <= cutoff);
  }

  // New-array execution when the caller's arrays share the planning alignment, buffer copies otherwise.
  std::vector<cplx> forward(std::span<const double> in) {
    std::vector<cplx> out(ncomplex);
    auto* o = reinterpret_cast<fftw_complex*>(out.data());
    double* i = const_cast<double*>(in.data());
    if (fftw_alignment_of(i) == fftw_alignment_of(real) && fftw_alignment_of(o[0]) == fftw_alignment_of(spec[0])) {
      fftw_execute_dft_r2c(fwd, i, o);
      return out;
    }
    std::copy(in.begin(), in.end(), real);
    fftw_execute(fwd);
    std::memcpy(static_cast<void*>(out.data()), spec, ncomplex * sizeof(fftw_complex));
    return out;
  }

  // Destroys s.
  void inverse(std::vector<cplx>& s, std::span<double> out) {
    auto* c = reinterpret_cast<fftw_complex*>(s.data());
    const double scale = 1.0 / double(nreal);
    if (fftw_alignment_of(c[0]) == fftw_alignment_of(spec[0]) && fftw_alignment_of(out.data()) == fftw_alignment_of(real)) {
      fftw_execute_dft_c2r(inv, c, out.data());
      for (double& v : out) v *= scale;
      return;
    }
    std::memcpy(spec, s.data(), ncomplex * sizeof(fftw_complex));
    fftw_execute(inv);
    for (std::size_t p = 0; p < nreal; ++p) out[p] = real[p] * scale;
  }

  int n, dim;
  std::size_t ncomplex = 0, nreal = 0;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan fwd = nullptr, inv = nullptr;
  std::vector<int> kx, ky;
  std::vector<double> ikx, iky;
};

DiffOps::DiffOps(const TorusGrid& grid, Backend backend) : grid_(grid), backend_(backend) {
  if (backend_ == Backend::spectral) fft_ = std::make_unique<Fft>(grid_);
}

DiffOps::~DiffOps() = default;

void DiffOps::fd_first(std::span<const double> in, int axis, std::span<double> out) const {
  const int n = grid_.n();
  const double inv12h = 1.0 / (12.0 * grid_.spacing());
  auto at = [&](int ix, int iy) { return in[grid_.index(ix, iy)]; };
  for (std::size_t p = 0; p < grid_.size(); ++p) {
    const int ix = grid_.axis_index(p, 0);
    const int iy = grid_.dim() == 2 ? grid_.axis_index(p, 1) : 0;
    const int sx = axis == 0 ? 1 : 0;
    const int sy = axis == 1 ? 1 : 0;
    out[p] = (-at(ix + 2 * sx, iy + 2 * sy) + 8.0 * at(ix + sx, iy + sy) - 8.0 * at(ix - sx, iy - sy) +
              at(ix - 2 * sx, iy - 2 * sy)) *
             inv12h;
  }
  (void)n;
}

void DiffOps::fd_second(std::span<const double> in, int axis, std::span<double> out) const {
  const double h = grid_.spacing();
  const double inv12h2 = 1.0 / (12.0 * h * h);
  auto at = [&](int ix, int iy) { return in[grid_.index(ix, iy)]; };
  for (std::size_t p = 0; p < grid_.size(); ++p) {
    const int ix = grid_.axis_index(p, 0);
    const int iy = grid_.dim() == 2 ? grid_.axis_index(p, 1) : 0;
    const int sx = axis == 0 ? 1 : 0;
    const int sy = axis == 1 ? 1 : 0;
    out[p] = (-at(ix + 2 * sx, iy + 2 * sy) + 16.0 * at(ix + sx, iy + sy) - 30.0 * at(ix, iy) +
              16.0 * at(ix - sx, iy - sy) - at(ix - 2 * sx, iy - 2 * sy)) *
             inv12h2;
  }
}

void DiffOps::partial(std::span<const double> in, int axis, std::span<double> out) const {
  if (backend_ == Backend::fd4) return fd_first(in, axis, out);
  auto s = fft_->forward(in);
  for (std::size_t q = 0; q < s.size(); ++q) s[q] = times_ik(s[q], fft_->ik(q, axis));
  fft_->inverse(s, out);
}

Field DiffOps::grad(const Field& s) const {
  Field out = Field::vector(grid_);
  const int d = grid_.dim();
  if (backend_ == Backend::fd4) {
    for (int a = 0; a < d; ++a) fd_first(s.comp(0), a, out.comp(a));
    return out;
  }
  const auto base = fft_->forward(s.comp(0));
  std::vector<std::complex<double>> t(base.size());
  for (int a = 0; a < d; ++a) {
    for (std::size_t q = 0; q < t.size(); ++q) t[q] = times_ik(base[q], fft_->ik(q, a));
    fft_->inverse(t, out.comp(a));
  }
  return out;
}

Field DiffOps::div(const Field& v) const {
  Field out = Field::scalar(grid_);
  const int d = grid_.dim();
  if (backend_ == Backend::fd4) {
    std::vector<double> tmp(grid_.size());
    for (int a = 0; a < d; ++a) {
      fd_first(v.comp(a), a, tmp);
      for (std::size_t p = 0; p < tmp.size(); ++p) out(p) += tmp[p];
    }
    return out;
  }
  std::vector<std::complex<double>> acc(fft_->ncomplex);
  for (int a = 0; a < d; ++a) {
    const auto s = fft_->forward(v.comp(a));
    for (std::size_t q = 0; q < s.size(); ++q) acc[q] += times_ik(s[q], fft_->ik(q, a));
  }
  fft_->inverse(acc, out.comp(0));
  return out;
}

Field DiffOps::div_mat(const Field& t) const {
  Field out = Field::vector(grid_);
  const int d = grid_.dim();
  if (backend_ == Backend::fd4) {
    std::vector<double> tmp(grid_.size());
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        fd_first(t.comp(i, j), j, tmp);
        auto o = out.comp(i);
        for (std::size_t p = 0; p < tmp.size(); ++p) o[p] += tmp[p];
      }
    return out;
  }
  for (int i = 0; i < d; ++i) {
    std::vector<std::complex<double>> acc(fft_->ncomplex);
    for (int j = 0; j < d; ++j) {
      const auto s = fft_->forward(t.comp(i, j));
      for (std::size_t q = 0; q < s.size(); ++q) acc[q] += times_ik(s[q], fft_->ik(q, j));
    }
    fft_->inverse(acc, out.comp(i));
  }
  return out;
}

Field DiffOps::jacobian(const Field& v) const {
  Field out = Field::matrix(grid_);
  const int d = grid_.dim();
  if (backend_ == Backend::fd4) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) fd_first(v.comp(i), j, out.comp(i, j));
    return out;
  }
  for (int i = 0; i < d; ++i) {
    const auto base = fft_->forward(v.comp(i));
    std::vector<std::complex<double>> t(base.size());
    for (int j = 0; j < d; ++j) {
      for (std::size_t q = 0; q < t.size(); ++q) t[q] = times_ik(base[q], fft_->ik(q, j));
      fft_->inverse(t, out.comp(i, j));
    }
  }
  return out;
}

Field DiffOps::sym_jacobian(const Field& v) const {
  const int d = grid_.dim();
  if (backend_ == Backend::fd4) {
    const Field J = jacobian(v);
    Field out = Field::matrix(grid_);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (std::size_t p = 0; p < J.points(); ++p) out(p, i * d + j) = J(p, i * d + j) + J(p, j * d + i);
    return out;
  }
  Field out = Field::matrix(grid_);
  std::vector<std::vector<std::complex<double>>> base;
  for (int i = 0; i < d; ++i) base.push_back(fft_->forward(v.comp(i)));
  std::vector<std::complex<double>> t(fft_->ncomplex);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      for (std::size_t q = 0; q < t.size(); ++q)
        t[q] = times_ik(base[i][q], fft_->ik(q, j)) + times_ik(base[j][q], fft_->ik(q, i));
      fft_->inverse(t, out.comp(i, j));
      if (i != j) std::ranges::copy(out.comp(i, j), out.comp(j, i).begin());
    }
  return out;
}

Field DiffOps::hessian(const Field& s) const {
  Field out = Field::matrix(grid_);
  const int d = grid_.dim();
  if (backend_ == Backend::fd4) {
    for (int a = 0; a < d; ++a) fd_second(s.comp(0), a, out.comp(a, a));
    if (d == 2) {
      std::vector<double> tmp(grid_.size()), xy(grid_.size()), yx(grid_.size());
      fd_first(s.comp(0), 0, tmp);
      fd_first(tmp, 1, xy);
      fd_first(s.comp(0), 1, tmp);
      fd_first(tmp, 0, yx);
      for (std::size_t p = 0; p < xy.size(); ++p) {
        const double m = 0.5 * (xy[p] + yx[p]);
        out(p, 1) = m;
        out(p, 2) = m;
      }
    }
    return out;
  }
  const auto base = fft_->forward(s.comp(0));
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      auto t = base;
      for (std::size_t q = 0; q < t.size(); ++q) {
        double mult;
        if (i == j) {
          const double kk = 2.0 * kPi * fft_->k(q, i);
          mult = -kk * kk;
        } else {
          mult = -fft_->ik(q, i) * fft_->ik(q, j);
        }
        t[q] *= mult;
      }
      fft_->inverse(t, out.comp(i, j));
      if (i != j) std::ranges::copy(out.comp(i, j), out.comp(j, i).begin());
    }
  return out;
}

Field DiffOps::laplacian(const Field& s) const {
  Field out = Field::scalar(grid_);
  const int d = grid_.dim();
  if (backend_ == Backend::fd4) {
    std::vector<double> tmp(grid_.size());
    for (int a = 0; a < d; ++a) {
      fd_second(s.comp(0), a, tmp);
      for (std::size_t p = 0; p < tmp.size(); ++p) out(p) += tmp[p];
    }
    return out;
  }
  auto t = fft_->forward(s.comp(0));
  for (std::size_t q = 0; q < t.size(); ++q) {
    double mult = 0.0;
    for (int a = 0; a < d; ++a) {
      const double kk = 2.0 * kPi * fft_->k(q, a);
      mult -= kk * kk;
    }
    t[q] *= mult;
  }
  fft_->inverse(t, out.comp(0));
  return out;
}

Field DiffOps::dealias(const Field& f) const {
  if (backend_ == Backend::fd4) return f;
  Field out = f;
  const int cutoff = grid_.n() / 3;
  for (int c = 0; c < f.components(); ++c) {
    auto t = fft_->forward(f.comp(c));
    for (std::size_t q = 0; q < t.size(); ++q)
      if (!fft_->kept(q, cutoff)) t[q] = 0.0;
    fft_->inverse(t, out.comp(c));
  }
  return out;
}

Field DiffOps::div_mat_dealiased(const Field& t, const Field& p, double c) const {
  if (backend_ == Backend::fd4) {
    Field sum = t;
    sum.axpy(c, p);
    return div_mat(sum);
  }
  Field out = Field::vector(grid_);
  const int d = grid_.dim();
  const int cutoff = grid_.n() / 3;
  for (int i = 0; i < d; ++i) {
    std::vector<std::complex<double>> acc(fft_->ncomplex);
    for (int j = 0; j < d; ++j) {
      const auto s = fft_->forward(t.comp(i, j));
      const auto r = fft_->forward(p.comp(i, j));
      for (std::size_t q = 0; q < s.size(); ++q) {
        const auto v = fft_->kept(q, cutoff) ? s[q] + c * r[q] : s[q];
        acc[q] += times_ik(v, fft_->ik(q, j));
      }
    }
    fft_->inverse(acc, out.comp(i));
  }
  return out;
}

std::pair<Field, Field> DiffOps::grad_hessian(const Field& s) const {
  if (backend_ == Backend::fd4) return {grad(s), hessian(s)};
  Field g = Field::vector(grid_);
  Field h = Field::matrix(grid_);
  const int d = grid_.dim();
  const auto base = fft_->forward(s.comp(0));
  std::vector<std::complex<double>> t(base.size());
  for (int a = 0; a < d; ++a) {
    for (std::size_t q = 0; q < t.size(); ++q) t[q] = times_ik(base[q], fft_->ik(q, a));
    fft_->inverse(t, g.comp(a));
  }
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      for (std::size_t q = 0; q < t.size(); ++q) {
        double mult;
        if (i == j) {
          const double kk = 2.0 * kPi * fft_->k(q, i);
          mult = -kk * kk;
        } else {
          mult = -fft_->ik(q, i) * fft_->ik(q, j);
        }
        t[q] = base[q] * mult;
      }
      fft_->inverse(t, h.comp(i, j));
      if (i != j) std::ranges::copy(h.comp(i, j), h.comp(j, i).begin());
    }
  return {std::move(g), std::move(h)};
}

// --------------------------------------------------------------- Mollifiers

double bump_profile(double r2) { return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0; }

MollifierKernel mollifier_kernel(const TorusGrid& grid, const MollifierSpec& spec) {
  const double h = grid.spacing();
  if (!(spec.epsilon >= 2.0 * h)) throw std::invalid_argument("mollifier: epsilon below 2h, kernel under-resolved");
  if (spec.epsilon >= 0.5) throw std::invalid_argument("mollifier: epsilon must be below half the torus side");
  MollifierKernel k;
  const int reach = int(std::ceil(spec.epsilon / h));
  const int yreach = grid.dim() == 2 ? reach : 0;
  double total = 0.0;
  for (int i = -reach; i <= reach; ++i)
    for (int j = -yreach; j <= yreach; ++j) {
      const double r2 = (double(i) * i + double(j) * j) * h * h / (spec.epsilon * spec.epsilon);
      const double w = bump_profile(r2);
      if (w <= 0.0) continue;
      k.dx.push_back(i);
      k.dy.push_back(j);
      k.w.push_back(w);
      total += w;
    }
  for (double& w : k.w) w /= total;
  return k;
}

namespace {
void convolve_into(const TorusGrid& g, std::span<const double> in, const MollifierKernel& k, double scale,
                   std::span<double> out) {
  for (std::size_t p = 0; p < g.size(); ++p) {
    const int ix = g.axis_index(p, 0);
    const int iy = g.dim() == 2 ? g.axis_index(p, 1) : 0;
    double acc = 0.0;
    for (std::size_t m = 0; m < k.w.size(); ++m) acc += k.w[m] * in[g.index(ix + k.dx[m], iy + k.dy[m])];
    out[p] += scale * acc;
  }
}
}  // namespace

Field mollify(const Field& f, const MollifierSpec& spec) {
  const auto k = mollifier_kernel(f.grid(), spec);
  Field out(f.grid(), f.rank());
  for (int c = 0; c < f.components(); ++c) convolve_into(f.grid(), f.comp(c), k, 1.0, out.comp(c));
  return out;
}

std::vector<Field> mollify_series(std::span<const Field> frames, double dt, const MollifierSpec& spec,
                                  std::size_t* first_index) {
  if (frames.empty()) throw std::invalid_argument("mollify_series: empty series");
  if (!(spec.epsilon >= 2.0 * dt)) throw std::invalid_argument("mollify_series: epsilon below 2dt");
  const TorusGrid& g = frames.front().grid();
  const double h = g.spacing();
  if (!(spec.epsilon >= 2.0 * h)) throw std::invalid_argument("mollify_series: epsilon below 2h, kernel under-resolved");
  const int kt = int(std::ceil(spec.epsilon / dt)) - 1;
  if (2 * std::size_t(kt) + 1 > frames.size())
    throw std::invalid_argument("mollify_series: epsilon exceeds the trajectory time extent");

  // Per time-offset spatial slices of the space-time bump.
  std::vector<MollifierKernel> slices;
  double total = 0.0;
  const int reach = int(std::ceil(spec.epsilon / h));
  const int yreach = g.dim() == 2 ? reach : 0;
  for (int s = -kt; s <= kt; ++s) {
    MollifierKernel k;
    for (int i = -reach; i <= reach; ++i)
      for (int j = -yreach; j <= yreach; ++j) {
        const double r2 = (double(s) * s * dt * dt + (double(i) * i + double(j) * j) * h * h) /
                          (spec.epsilon * spec.epsilon);
        const double w = bump_profile(r2);
        if (w <= 0.0) continue;
        k.dx.push_back(i);
        k.dy.push_back(j);
        k.w.push_back(w);
        total += w;
      }
    slices.push_back(std::move(k));
  }
  for (auto& k : slices)
    for (double& w : k.w) w /= total;

  std::vector<Field> out;
  for (std::size_t idx = std::size_t(kt); idx + std::size_t(kt) < frames.size(); ++idx) {
    Field acc(g, frames[idx].rank());
    for (int s = -kt; s <= kt; ++s) {
      const Field& src = frames[idx + s];
      for (int c = 0; c < src.components(); ++c) convolve_into(g, src.comp(c), slices[s + kt], 1.0, acc.comp(c));
    }
    out.push_back(std::move(acc));
  }
  if (first_index) *first_index = std::size_t(kt);
  return out;
}

// --------------------------------------------------------------- Quadrature

double integrate(const Field& s) {
  double acc = 0.0;
  for (double v : s.comp(0)) acc += v;
  return acc / double(s.points());
}

double lp_norm(const Field& f, double p) {
  if (p < 1.0) throw std::invalid_argument("lp_norm: p must be >= 1");
  const Field mag2 = squared_magnitude(f);
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : mag2.comp(0)) m = std::max(m, std::sqrt(v));
    return m;
  }
  double acc = 0.0;
  for (double v : mag2.comp(0)) acc += std::pow(std::sqrt(v), p);
  return std::pow(acc / double(f.points()), 1.0 / p);
}

double trapezoid(std::span<const double> times, std::span<const double> values) {
  double acc = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k) acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
  return acc;
}

double mixed_norm_from_slices(std::span<const double> times, std::span<const double> spatial_norms,
                              const MixedNormSpec& spec) {
  if (!(spec.t1 > spec.t0)) throw std::invalid_argument("mixed_norm: empty time window");
  const double tol = 1e-12 * std::max(1.0, std::abs(spec.t1));
  std::vector<double> t, v;
  for (std::size_t k = 0; k < times.size(); ++k)
    if (times[k] >= spec.t0 - tol && times[k] <= spec.t1 + tol) {
      t.push_back(times[k]);
      v.push_back(spatial_norms[k]);
    }
  if (t.empty()) throw std::invalid_argument("mixed_norm: no samples in time window");
  if (std::isinf(spec.time_exponent)) return *std::max_element(v.begin(), v.end());
  if (t.size() < 2) throw std::invalid_argument("mixed_norm: need at least two samples for finite time exponent");
  for (double& x : v) x = std::pow(x, spec.time_exponent);
  return std::pow(trapezoid(t, v), 1.0 / spec.time_exponent);
}

double mixed_norm(std::span<const double> times, std::span<const Field> frames, const MixedNormSpec& spec) {
  std::vector<double> norms;
  norms.reserve(frames.size());
  for (const auto& f : frames) norms.push_back(lp_norm(f, spec.space_exponent));
  return mixed_norm_from_slices(times, norms, spec);
}

// ---------------------------------------------------------------- Snapshots

namespace {
template <class T>
void put_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::uint64_t bits = 0;
  if constexpr (std::is_same_v<T, double>) {
    bits = std::bit_cast<std::uint64_t>(v);
  } else {
    bits = std::uint64_t(v);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw std::runtime_error("snapshot: truncated stream");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= std::uint64_t(buf[i]) << (8 * i);
  if constexpr (std::is_same_v<T, double>) {
    return std::bit_cast<double>(bits);
  } else {
    return T(bits);
  }
}
}  // namespace

void write_snapshot(std::ostream& os, const Field& f) {
  os.write("QNSF", 4);
  put_le<std::uint16_t>(os, kSnapshotVersion);
  put_le<std::uint16_t>(os, std::uint16_t(f.dim()));
  put_le<std::uint32_t>(os, std::uint32_t(f.grid().n()));
  put_le<std::uint16_t>(os, std::uint16_t(f.rank()));
  put_le<std::uint32_t>(os, std::uint32_t(f.components()));
  for (std::size_t p = 0; p < f.points(); ++p)
    for (int c = 0; c < f.components(); ++c) put_le<double>(os, f(p, c));
}

Field read_snapshot(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "QNSF", 4) != 0) throw std::runtime_error("snapshot: bad magic");
  const auto version = get_le<std::uint16_t>(is);
  if (version != kSnapshotVersion) throw std::runtime_error("snapshot: unsupported version");
  const auto d = get_le<std::uint16_t>(is);
  const auto n = get_le<std::uint32_t>(is);
  const auto rank = get_le<std::uint16_t>(is);
  const auto ncomp = get_le<std::uint32_t>(is);
  Field f(TorusGrid(d, int(n)), rank);
  if (std::uint32_t(f.components()) != ncomp) throw std::runtime_error("snapshot: component count mismatch");
  for (std::size_t p = 0; p < f.points(); ++p)
    for (int c = 0; c < f.components(); ++c) f(p, c) = get_le<double>(is);
  return f;
}

void write_snapshot_file(const std::string& path, std::span<const Field> fields) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("snapshot: cannot open " + path);
  for (const auto& f : fields) write_snapshot(os, f);
}

std::vector<Field> read_snapshot_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("snapshot: cannot open " + path);
  std::vector<Field> out;
  while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_snapshot(is));
  return out;
}

}  // namespace qns
