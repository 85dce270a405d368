#pragma once

// Truncated Taylor series in one variable: c[k] = f^(k)(x0) / k!.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace qns {

template <std::size_t K>
struct Jet {
  std::array<double, K + 1> c{};
  std::size_t valid = K;  // highest trustworthy coefficient

  static Jet constant(double v) {
    Jet j;
    j.c[0] = v;
    return j;
  }
  static Jet variable(double x0) {
    Jet j;
    j.c[0] = x0;
    if constexpr (K >= 1) j.c[1] = 1.0;
    return j;
  }

  double value() const { return c[0]; }
  /// k-th derivative at x0.
  double derivative(std::size_t k) const {
    double f = 1.0;
    for (std::size_t i = 2; i <= k; ++i) f *= double(i);
    return c[k] * f;
  }

  friend Jet operator+(Jet a, const Jet& b) {
    for (std::size_t k = 0; k <= K; ++k) a.c[k] += b.c[k];
    a.valid = std::min(a.valid, b.valid);
    return a;
  }
  friend Jet operator-(Jet a, const Jet& b) {
    for (std::size_t k = 0; k <= K; ++k) a.c[k] -= b.c[k];
    a.valid = std::min(a.valid, b.valid);
    return a;
  }
  friend Jet operator*(double s, Jet a) {
    for (double& v : a.c) v *= s;
    return a;
  }
  friend Jet operator+(double s, Jet a) {
    a.c[0] += s;
    return a;
  }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (std::size_t k = 0; k <= K; ++k)
      for (std::size_t j = 0; j <= k; ++j) r.c[k] += a.c[j] * b.c[k - j];
    r.valid = std::min(a.valid, b.valid);
    return r;
  }
  friend Jet operator/(const Jet& a, const Jet& b) {
    Jet q;
    for (std::size_t k = 0; k <= K; ++k) {
      double s = a.c[k];
      for (std::size_t j = 1; j <= k; ++j) s -= b.c[j] * q.c[k - j];
      q.c[k] = s / b.c[0];
    }
    q.valid = std::min(a.valid, b.valid);
    return q;
  }
};

template <std::size_t K>
Jet<K> d(const Jet<K>& a) {
  Jet<K> r;
  for (std::size_t k = 0; k < K; ++k) r.c[k] = double(k + 1) * a.c[k + 1];
  r.valid = a.valid == 0 ? 0 : a.valid - 1;
  return r;
}

template <std::size_t K>
Jet<K> exp(const Jet<K>& a) {
  Jet<K> e;
  e.c[0] = std::exp(a.c[0]);
  for (std::size_t k = 1; k <= K; ++k) {
    double s = 0.0;
    for (std::size_t j = 1; j <= k; ++j) s += double(j) * a.c[j] * e.c[k - j];
    e.c[k] = s / double(k);
  }
  e.valid = a.valid;
  return e;
}

template <std::size_t K>
Jet<K> log(const Jet<K>& a) {
  Jet<K> l;
  l.c[0] = std::log(a.c[0]);
  for (std::size_t k = 1; k <= K; ++k) {
    double s = 0.0;
    for (std::size_t j = 1; j < k; ++j) s += double(j) * l.c[j] * a.c[k - j];
    l.c[k] = (a.c[k] - s / double(k)) / a.c[0];
  }
  l.valid = a.valid;
  return l;
}

template <std::size_t K>
Jet<K> pow(const Jet<K>& a, double p) {
  return exp(p * log(a));
}

template <std::size_t K>
Jet<K> sqrt(const Jet<K>& a) {
  return pow(a, 0.5);
}

template <std::size_t K>
void sincos(const Jet<K>& a, Jet<K>& s, Jet<K>& co) {
  s = Jet<K>{};
  co = Jet<K>{};
  s.c[0] = std::sin(a.c[0]);
  co.c[0] = std::cos(a.c[0]);
  for (std::size_t k = 1; k <= K; ++k) {
    double ss = 0.0, cc = 0.0;
    for (std::size_t j = 1; j <= k; ++j) {
      ss += double(j) * a.c[j] * co.c[k - j];
      cc -= double(j) * a.c[j] * s.c[k - j];
    }
    s.c[k] = ss / double(k);
    co.c[k] = cc / double(k);
  }
  s.valid = co.valid = a.valid;
}

template <std::size_t K>
Jet<K> sin(const Jet<K>& a) {
  Jet<K> s, c;
  sincos(a, s, c);
  return s;
}

}  // namespace qns
