#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace relopt {

/// Forward-mode dual number carrying N partial derivatives.
///
/// Energy terms are written once as templates over the scalar type and
/// instantiated with `double` (value only) or `Dual<N>` (value + gradient).
/// A term touches at most two objects, so N is 7 or 14.
template <int N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: constants promote

  static Dual variable(double value, int slot) {
    Dual r(value);
    r.d[slot] = 1.0;
    return r;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator+=(double s) {
    v += s;
    return *this;
  }
  Dual& operator-=(double s) {
    v -= s;
    return *this;
  }
  Dual& operator*=(double s) {
    v *= s;
    for (auto& x : d) x *= s;
    return *this;
  }
  Dual& operator*=(const Dual& o) { return *this = *this * o; }
  Dual& operator/=(const Dual& o) { return *this = *this / o; }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator+(Dual a, double b) { return a += b; }
  friend Dual operator+(double a, Dual b) { return b += a; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator-(Dual a, double b) { return a -= b; }
  friend Dual operator-(double a, const Dual& b) { return Dual(a) - b; }
  friend Dual operator-(Dual a) {
    a.v = -a.v;
    for (auto& x : a.d) x = -x;
    return a;
  }
  friend Dual operator*(Dual a, double s) { return a *= s; }
  friend Dual operator*(double s, Dual a) { return a *= s; }
  friend Dual operator*(const Dual& a, const Dual& b) {
    Dual r(a.v * b.v);
    for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
  }
  friend Dual operator/(const Dual& a, double s) { return a * (1.0 / s); }
  friend Dual operator/(const Dual& a, const Dual& b) {
    const double inv = 1.0 / b.v;
    Dual r(a.v * inv);
    for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
    return r;
  }
  friend Dual operator/(double a, const Dual& b) { return Dual(a) / b; }

  friend bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
  friend bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }

  // Chain rule helper: f(a) with f'(a) = slope.
  friend Dual chain(const Dual& a, double value, double slope) {
    Dual r(value);
    for (int i = 0; i < N; ++i) r.d[i] = slope * a.d[i];
    return r;
  }
  friend Dual sin(const Dual& a) { return chain(a, std::sin(a.v), std::cos(a.v)); }
  friend Dual cos(const Dual& a) { return chain(a, std::cos(a.v), -std::sin(a.v)); }
  friend Dual sqrt(const Dual& a) {
    const double r = std::sqrt(a.v);
    return chain(a, r, r > 0.0 ? 0.5 / r : 0.0);
  }
  friend Dual atan(const Dual& a) { return chain(a, std::atan(a.v), 1.0 / (1.0 + a.v * a.v)); }
  friend Dual asin(const Dual& a) {
    return chain(a, std::asin(a.v), 1.0 / std::sqrt(std::max(1e-300, 1.0 - a.v * a.v)));
  }
  friend Dual exp(const Dual& a) {
    const double e = std::exp(a.v);
    return chain(a, e, e);
  }
  friend Dual log(const Dual& a) { return chain(a, std::log(a.v), 1.0 / a.v); }
  friend Dual floor(const Dual& a) { return Dual(std::floor(a.v)); }
  friend Dual atan2(const Dual& y, const Dual& x) {
    const double r2 = x.v * x.v + y.v * y.v;
    Dual r(std::atan2(y.v, x.v));
    if (r2 > 0.0) {
      for (int i = 0; i < N; ++i) r.d[i] = (x.v * y.d[i] - y.v * x.d[i]) / r2;
    }
    return r;
  }
  friend bool isfinite(const Dual& a) {
    if (!std::isfinite(a.v)) return false;
    for (double x : a.d)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
  return x.v;
}

}  // namespace relopt
