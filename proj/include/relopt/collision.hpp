#pragma once

#include <array>
#include <cmath>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "relopt/math.hpp"
#include "relopt/scene.hpp"

namespace relopt {

// Separating-axis measures for yaw-only boxes.
//
// Edges of a yaw-only box point along y or one of its two horizontal axes.
// Cross products of such edges are y (two horizontal edges) or the horizontal
// normal of one box (y crossed with a horizontal edge), so the face normals
// {y, a.x, a.z, b.x, b.z} already contain every candidate separating axis.

enum class AxisSet {
  Deduplicated,    // shared y axis once, parallel horizontal axes once (<= 5 axes)
  AllFaceNormals,  // three face normals of each box, duplicates kept (6 axes)
};

inline constexpr double kParallelTolerance = 1e-6;

template <class T>
struct SatGaps {
  std::array<Vec3<T>, 6> axes;
  std::array<T, 6> gaps;  // > 0 separated along the axis, < 0 overlapping
  int count = 0;

  bool colliding() const {
    for (int k = 0; k < count; ++k)
      if (!(value_of(gaps[k]) < 0.0)) return false;
    return true;
  }
};

namespace detail {

template <class T>
void push_axis(SatGaps<T>& out, const Vec3<T>& axis, const T& ca, const T& ra, const T& cb,
               const T& rb) {
  // max(b_min - a_max, a_min - b_max): positive gap when disjoint, otherwise
  // minus the smaller of |a_max - b_min| and |a_min - b_max|
  out.axes[out.count] = axis;
  out.gaps[out.count] = pick_max((cb - rb) - (ca + ra), (ca - ra) - (cb + rb));
  ++out.count;
}

template <class T>
T horizontal_radius(const BasicBox<T>& box, const Vec3<T>& axis) {
  return box.size.x * 0.5 * abs_val(dot(axis, box.axis_x())) +
         box.size.z * 0.5 * abs_val(dot(axis, box.axis_z()));
}

template <class T>
T cross_y(const Vec3<T>& a, const Vec3<T>& b) {
  return a.z * b.x - a.x * b.z;
}

}  // namespace detail

/// Signed gaps of the two boxes along every separating axis.
template <class T>
SatGaps<T> sat_gaps(const BasicBox<T>& a, const BasicBox<T>& b,
                    AxisSet mode = AxisSet::Deduplicated) {
  SatGaps<T> out;
  const Vec3<T> up{T(0.0), T(1.0), T(0.0)};
  const Vec3<T> ax = a.axis_x(), az = a.axis_z(), bx = b.axis_x(), bz = b.axis_z();
  const T hax = a.size.x * 0.5, haz = a.size.z * 0.5, hbx = b.size.x * 0.5, hbz = b.size.z * 0.5;

  detail::push_axis(out, up, a.center.y, a.size.y * 0.5, b.center.y, b.size.y * 0.5);
  if (mode == AxisSet::AllFaceNormals)
    detail::push_axis(out, up, a.center.y, a.size.y * 0.5, b.center.y, b.size.y * 0.5);

  detail::push_axis(out, ax, dot(a.center, ax), hax, dot(b.center, ax),
                    detail::horizontal_radius(b, ax));
  detail::push_axis(out, az, dot(a.center, az), haz, dot(b.center, az),
                    detail::horizontal_radius(b, az));

  bool parallel = false;
  if (mode == AxisSet::Deduplicated) {
    const double c = std::min(std::abs(value_of(detail::cross_y(ax, bx))),
                              std::abs(value_of(detail::cross_y(ax, bz))));
    note_switch(c - kParallelTolerance);
    parallel = c < kParallelTolerance;
  }
  if (!parallel) {
    detail::push_axis(out, bx, dot(a.center, bx), detail::horizontal_radius(a, bx),
                      dot(b.center, bx), hbx);
    detail::push_axis(out, bz, dot(a.center, bz), detail::horizontal_radius(a, bz),
                      dot(b.center, bz), hbz);
  }
  return out;
}

/// Sum of overlaps over all axes when the boxes collide, else 0.
template <class T>
T collision_energy(const SatGaps<T>& g) {
  T e(0.0);
  double margin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < g.count; ++k) margin = std::min(margin, std::abs(value_of(g.gaps[k])));
  note_switch(margin);
  if (!g.colliding()) return e;
  for (int k = 0; k < g.count; ++k) e -= g.gaps[k];
  return e;
}

/// Sum of positive per-axis gaps; 0 when the boxes collide.
template <class T>
T separation_energy(const SatGaps<T>& g) {
  T e(0.0);
  if (g.colliding()) return e;
  for (int k = 0; k < g.count; ++k) e += positive_part(g.gaps[k]);
  return e;
}

struct SeparationProfile {
  std::vector<Vec3d> axes;
  std::vector<double> gaps;
  bool colliding = false;
};

namespace detail {

// Fixed evaluation order makes every pairwise measure exactly symmetric.
inline bool canonical_first(const OrientedBox& a, const OrientedBox& b) {
  return std::tie(a.center.x, a.center.y, a.center.z, a.size.x, a.size.y, a.size.z, a.yaw) <=
         std::tie(b.center.x, b.center.y, b.center.z, b.size.x, b.size.y, b.size.z, b.yaw);
}

inline SatGaps<double> canonical_gaps(const OrientedBox& a, const OrientedBox& b, AxisSet mode) {
  return canonical_first(a, b) ? sat_gaps(a, b, mode) : sat_gaps(b, a, mode);
}

}  // namespace detail

inline SeparationProfile sat_profile(const OrientedBox& a, const OrientedBox& b,
                                     AxisSet mode = AxisSet::Deduplicated) {
  const auto g = detail::canonical_gaps(a, b, mode);
  SeparationProfile p;
  p.axes.assign(g.axes.begin(), g.axes.begin() + g.count);
  p.gaps.assign(g.gaps.begin(), g.gaps.begin() + g.count);
  p.colliding = g.colliding();
  return p;
}

inline bool boxes_collide(const OrientedBox& a, const OrientedBox& b) {
  return detail::canonical_gaps(a, b, AxisSet::Deduplicated).colliding();
}

inline double collision_energy_pair(const OrientedBox& a, const OrientedBox& b,
                                    AxisSet mode = AxisSet::Deduplicated) {
  return collision_energy(detail::canonical_gaps(a, b, mode));
}

/// True when the boxes touch or overlap once each half-extent grows by tolerance / 2.
inline bool contact_test(const OrientedBox& a, const OrientedBox& b, double tolerance) {
  return boxes_collide(expanded(a, 0.5 * tolerance), expanded(b, 0.5 * tolerance));
}

// ---------------------------------------------------------------------------
// Floor polygon queries

inline constexpr double kPolygonEdgeEpsilon = 1e-9;

template <class T>
T distance_to_segment(const Vec2<T>& p, const Vec2d& a, const Vec2d& b) {
  using std::sqrt;
  const Vec2d ab{b.x - a.x, b.z - a.z};
  const double len2 = ab.x * ab.x + ab.z * ab.z;
  const T t_raw = ((p.x - a.x) * ab.x + (p.z - a.z) * ab.z) / len2;
  const T t = pick_min(pick_max(t_raw, T(0.0)), T(1.0));
  const T dx = p.x - (a.x + t * ab.x);
  const T dz = p.z - (a.z + t * ab.z);
  return sqrt(dx * dx + dz * dz);
}

/// Unsigned distance from p to the polygon boundary.
template <class T>
T distance_to_boundary(const Vec2<T>& p, std::span<const Vec2d> poly) {
  T best = distance_to_segment(p, poly[0], poly[1 % poly.size()]);
  for (std::size_t i = 1; i < poly.size(); ++i)
    best = pick_min(best, distance_to_segment(p, poly[i], poly[(i + 1) % poly.size()]));
  return best;
}

/// Even-odd test; points within 1e-9 of an edge count as inside.
inline bool point_in_polygon(const Vec2d& p, std::span<const Vec2d> poly) {
  if (distance_to_boundary(p, poly) <= kPolygonEdgeEpsilon) return true;
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2d& a = poly[i];
    const Vec2d& b = poly[j];
    if ((a.z > p.z) != (b.z > p.z)) {
      const double x_cross = a.x + (p.z - a.z) * (b.x - a.x) / (b.z - a.z);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

/// Signed distance to the polygon boundary, negative inside.
inline double signed_polygon_distance(const Vec2d& p, std::span<const Vec2d> poly) {
  const double d = distance_to_boundary(p, poly);
  return point_in_polygon(p, poly) ? -d : d;
}

/// Sum over corners outside the floor polygon of their distance to it.
template <class T>
T wall_collision(const BasicBox<T>& box, const LayoutShell& layout) {
  T e(0.0);
  for (const auto& c : box_corners(box)) {
    const Vec2<T> p{c.x, c.z};
    const Vec2d pv{value_of(c.x), value_of(c.z)};
    const T d = distance_to_boundary(p, std::span<const Vec2d>(layout.floor_polygon));
    note_switch(value_of(d));
    if (!point_in_polygon(pv, layout.floor_polygon)) e += d;
  }
  return e;
}

/// (penetration below the floor, penetration above the ceiling)
template <class T>
std::pair<T, T> floor_ceiling_collision(const BasicBox<T>& box, const LayoutShell& layout) {
  return {positive_part(layout.floor_y - box.bottom()),
          positive_part(box.top() - layout.ceiling_y)};
}

}  // namespace relopt
