#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "relopt/dual.hpp"

namespace relopt {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <class T>
struct Vec3 {
  T x{}, y{}, z{};

  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(const Vec3& a, const T& s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator*(const T& s, const Vec3& a) { return {a.x * s, a.y * s, a.z * s}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

using Vec3d = Vec3<double>;

template <class T>
T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <class T>
T norm(const Vec3<T>& a) {
  using std::sqrt;
  return sqrt(dot(a, a));
}

template <class T>
Vec3d value_of(const Vec3<T>& a) {
  return {value_of(a.x), value_of(a.y), value_of(a.z)};
}

/// Horizontal-plane point (x, z). Floor polygons live here.
template <class T>
struct Vec2 {
  T x{}, z{};

  friend Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.x + b.x, a.z + b.z}; }
  friend Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.z - b.z}; }
  friend Vec2 operator*(const Vec2& a, const T& s) { return {a.x * s, a.z * s}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

using Vec2d = Vec2<double>;

/// Wraps to [-pi, pi). Derivatives pass through unchanged.
template <class T>
T wrap_angle(const T& a) {
  using std::floor;
  const double turns = std::floor((value_of(a) + kPi) / kTwoPi);
  T r = a - turns * kTwoPi;
  // floor() can land exactly on +pi after rounding
  if (value_of(r) >= kPi) r -= kTwoPi;
  if (value_of(r) < -kPi) r += kTwoPi;
  return r;
}

// ---------------------------------------------------------------------------
// Switch monitoring.
//
// Every branch of the objective that makes it non-smooth (max/min selection,
// absolute value, inside/outside tests, angle wrap) reports the distance of
// its deciding quantity from the switch. Installing a SwitchMonitor records
// the smallest such distance for one evaluation; gradient checks use it to
// discard configurations that sit near a kink.

struct SwitchMonitor {
  double min_margin = std::numeric_limits<double>::infinity();
};

inline thread_local SwitchMonitor* active_switch_monitor = nullptr;

class ScopedSwitchMonitor {
 public:
  explicit ScopedSwitchMonitor(SwitchMonitor& m) : prev_(active_switch_monitor) {
    active_switch_monitor = &m;
  }
  ~ScopedSwitchMonitor() { active_switch_monitor = prev_; }
  ScopedSwitchMonitor(const ScopedSwitchMonitor&) = delete;
  ScopedSwitchMonitor& operator=(const ScopedSwitchMonitor&) = delete;

 private:
  SwitchMonitor* prev_;
};

inline void note_switch(double margin) {
  if (auto* m = active_switch_monitor) m->min_margin = std::min(m->min_margin, std::abs(margin));
}

/// max(a, b); ties pick a.
template <class T>
T pick_max(const T& a, const T& b) {
  note_switch(value_of(a) - value_of(b));
  return value_of(a) >= value_of(b) ? a : b;
}

/// min(a, b); ties pick a.
template <class T>
T pick_min(const T& a, const T& b) {
  note_switch(value_of(a) - value_of(b));
  return value_of(a) <= value_of(b) ? a : b;
}

/// |a| with zero derivative at exactly zero.
template <class T>
T abs_val(const T& a) {
  note_switch(value_of(a));
  if (value_of(a) > 0.0) return a;
  if (value_of(a) < 0.0) return -a;
  return T(0.0);
}

/// max(0, a).
template <class T>
T positive_part(const T& a) {
  note_switch(value_of(a));
  return value_of(a) > 0.0 ? a : T(0.0);
}

/// |wrap(a)|, the absolute angular difference; switches at 0 and at +-pi.
template <class T>
T angle_abs_error(const T& a) {
  const T w = wrap_angle(a);
  note_switch(kPi - std::abs(value_of(w)));
  return abs_val(w);
}

}  // namespace relopt
