#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace transonic {

/// Truncated Taylor series: c[k] is the k-th normalized coefficient f^(k)/k!.
template <std::size_t N>
struct Jet {
  std::array<double, N + 1> c{};

  static constexpr std::size_t order = N;

  static Jet constant(double v) {
    Jet j;
    j.c[0] = v;
    return j;
  }
  static Jet variable(double x) {
    Jet j;
    j.c[0] = x;
    if constexpr (N >= 1) j.c[1] = 1.0;
    return j;
  }

  double value() const { return c[0]; }

  /// k-th derivative.
  double derivative(std::size_t k) const {
    double f = 1.0;
    for (std::size_t i = 2; i <= k; ++i) f *= double(i);
    return c[k] * f;
  }

  /// Jet of the derivative; the top coefficient is lost.
  Jet differentiate() const {
    Jet r;
    for (std::size_t k = 0; k < N; ++k) r.c[k] = double(k + 1) * c[k + 1];
    return r;
  }

  Jet& operator+=(const Jet& o) {
    for (std::size_t k = 0; k <= N; ++k) c[k] += o.c[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (std::size_t k = 0; k <= N; ++k) c[k] -= o.c[k];
    return *this;
  }
  Jet& operator*=(double s) {
    for (auto& v : c) v *= s;
    return *this;
  }
};

template <std::size_t N>
Jet<N> operator+(Jet<N> a, const Jet<N>& b) { return a += b; }
template <std::size_t N>
Jet<N> operator-(Jet<N> a, const Jet<N>& b) { return a -= b; }
template <std::size_t N>
Jet<N> operator-(Jet<N> a) { return a *= -1.0; }
template <std::size_t N>
Jet<N> operator*(Jet<N> a, double s) { return a *= s; }
template <std::size_t N>
Jet<N> operator*(double s, Jet<N> a) { return a *= s; }
template <std::size_t N>
Jet<N> operator+(Jet<N> a, double s) { a.c[0] += s; return a; }
template <std::size_t N>
Jet<N> operator+(double s, Jet<N> a) { a.c[0] += s; return a; }
template <std::size_t N>
Jet<N> operator-(Jet<N> a, double s) { a.c[0] -= s; return a; }
template <std::size_t N>
Jet<N> operator-(double s, const Jet<N>& a) { return (-a) + s; }

template <std::size_t N>
Jet<N> operator*(const Jet<N>& a, const Jet<N>& b) {
  Jet<N> r;
  for (std::size_t k = 0; k <= N; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j <= k; ++j) s += a.c[j] * b.c[k - j];
    r.c[k] = s;
  }
  return r;
}

template <std::size_t N>
Jet<N> operator/(const Jet<N>& a, const Jet<N>& b) {
  Jet<N> q;
  for (std::size_t k = 0; k <= N; ++k) {
    double s = a.c[k];
    for (std::size_t j = 1; j <= k; ++j) s -= b.c[j] * q.c[k - j];
    q.c[k] = s / b.c[0];
  }
  return q;
}

template <std::size_t N>
Jet<N> operator/(const Jet<N>& a, double s) { return a * (1.0 / s); }

template <std::size_t N>
Jet<N> operator/(double s, const Jet<N>& b) { return Jet<N>::constant(s) / b; }

template <std::size_t N>
Jet<N> exp(const Jet<N>& a) {
  Jet<N> e;
  e.c[0] = std::exp(a.c[0]);
  for (std::size_t k = 1; k <= N; ++k) {
    double s = 0.0;
    for (std::size_t j = 1; j <= k; ++j) s += double(j) * a.c[j] * e.c[k - j];
    e.c[k] = s / double(k);
  }
  return e;
}

/// a^r for a.c[0] > 0.
template <std::size_t N>
Jet<N> pow(const Jet<N>& a, double r) {
  Jet<N> p;
  p.c[0] = std::pow(a.c[0], r);
  for (std::size_t k = 1; k <= N; ++k) {
    double s = 0.0;
    for (std::size_t j = 1; j <= k; ++j) s += ((r + 1.0) * double(j) - double(k)) * a.c[j] * p.c[k - j];
    p.c[k] = s / (double(k) * a.c[0]);
  }
  return p;
}

template <std::size_t N>
Jet<N> sqrt(const Jet<N>& a) { return pow(a, 0.5); }

/// Re-expand the polynomial sum c_k t^k about t = s.
template <std::size_t N>
Jet<N> shift(const Jet<N>& a, double s) {
  Jet<N> r;
  for (std::size_t k = 0; k <= N; ++k) {
    double binom = 1.0, acc = 0.0, sp = 1.0;
    for (std::size_t j = k; j <= N; ++j) {
      acc += binom * a.c[j] * sp;
      binom = binom * double(j + 1) / double(j + 1 - k);
      sp *= s;
    }
    r.c[k] = acc;
  }
  return r;
}

using Jet6 = Jet<6>;

}  // namespace transonic
