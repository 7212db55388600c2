#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <tuple>
#include <vector>

#include "relopt/error.hpp"
#include "relopt/math.hpp"
#include "relopt/scene.hpp"

namespace relopt {

inline Vec3d lonlat_to_dir(const SphericalDir& s) { return direction(s.lon, s.lat); }

/// Any non-zero vector; the pole maps to lon 0.
inline SphericalDir dir_to_lonlat(const Vec3d& v) {
  const double n = norm(v);
  require(n > 0.0 && std::isfinite(n), "dir_to_lonlat: zero or non-finite vector");
  const double horiz = std::hypot(v.x, v.z);
  SphericalDir s;
  s.lat = std::atan2(v.y, horiz);
  s.lon = horiz > 1e-15 * n ? wrap_angle(std::atan2(v.x, v.z)) : 0.0;
  return s;
}

/// Perspective frame whose forward axis is the given view direction.
template <class T>
struct TangentFrame {
  Vec3<T> right, up, forward;

  static TangentFrame at(const T& lon, const T& lat) {
    using std::cos;
    using std::sin;
    const T sl = sin(lon), cl = cos(lon), sp = sin(lat), cp = cos(lat);
    return {{cl, T(0.0), -sl}, {-sp * sl, cp, -sp * cl}, {cp * sl, sp, cp * cl}};
  }
};

/// Axis-aligned rectangle on a tangent plane at unit focal length.
template <class T>
struct BasicTangentBox {
  T u{}, v{};    // center offset
  T hu{}, hv{};  // half extents
};

using TangentBox2D = BasicTangentBox<double>;

/// Rectangle bounding the perspective projection of the cuboid's corners onto the
/// tangent plane at the direction of its center. Empty when any corner lies on or
/// behind that plane (angle from the center direction >= pi/2).
template <class T>
std::optional<BasicTangentBox<T>> project_box_to_tangent(const BasicBox<T>& box) {
  using std::atan2;
  using std::sqrt;
  const Vec3<T>& c = box.center;
  const T horiz = sqrt(c.x * c.x + c.z * c.z);
  const T lon = atan2(c.x, c.z);
  const T lat = atan2(c.y, horiz);
  const auto frame = TangentFrame<T>::at(lon, lat);
  const auto corners = box_corners(box);
  T umin{}, umax{}, vmin{}, vmax{};
  for (int k = 0; k < 8; ++k) {
    const T depth = dot(corners[k], frame.forward);
    if (!(value_of(depth) > 0.0)) return std::nullopt;
    note_switch(value_of(depth));
    const T u = dot(corners[k], frame.right) / depth;
    const T v = dot(corners[k], frame.up) / depth;
    if (k == 0) {
      umin = umax = u;
      vmin = vmax = v;
    } else {
      umin = pick_min(umin, u);
      umax = pick_max(umax, u);
      vmin = pick_min(vmin, v);
      vmax = pick_max(vmax, v);
    }
  }
  return BasicTangentBox<T>{(umin + umax) * 0.5, (vmin + vmax) * 0.5, (umax - umin) * 0.5,
                            (vmax - vmin) * 0.5};
}

/// Angular rectangle (lon, lat, hfov, vfov) used for BFoV arithmetic.
template <class T>
struct AngularRect {
  T lon{}, lat{}, hfov{}, vfov{};
};

template <class T>
AngularRect<T> angular_rect_of_tangent_box(const BasicTangentBox<T>& t, const T& lon,
                                           const T& lat) {
  using std::atan;
  using std::atan2;
  using std::sqrt;
  const auto frame = TangentFrame<T>::at(lon, lat);
  const Vec3<T> d = frame.forward + frame.right * t.u + frame.up * t.v;
  AngularRect<T> r;
  r.lon = atan2(d.x, d.z);
  r.lat = atan2(d.y, sqrt(d.x * d.x + d.z * d.z));
  r.hfov = atan(t.u + t.hu) - atan(t.u - t.hu);
  r.vfov = atan(t.v + t.hv) - atan(t.v - t.hv);
  return r;
}

/// BFoV covering a tangent-plane rectangle around `center`: the rectangle center
/// is mapped back to a direction and extents are converted with arctangents.
inline BFoV bfov_of_tangent_box(const TangentBox2D& t, const SphericalDir& center) {
  const auto r = angular_rect_of_tangent_box(t, center.lon, center.lat);
  BFoV b;
  b.center = {wrap_angle(r.lon), r.lat};
  b.hfov = r.hfov;
  b.vfov = r.vfov;
  return b;
}

/// IoU of two angular rectangles in (lon, lat) space. `b` is shifted by a
/// multiple of 2*pi so its center is the closest alignment to `a`.
template <class T>
T angular_rect_iou(const AngularRect<T>& a, AngularRect<T> b) {
  const double shift = value_of(b.lon) - value_of(wrap_angle(b.lon - a.lon) + a.lon);
  b.lon -= shift;
  const T w = positive_part(pick_min(a.lon + a.hfov * 0.5, b.lon + b.hfov * 0.5) -
                            pick_max(a.lon - a.hfov * 0.5, b.lon - b.hfov * 0.5));
  const T h = positive_part(pick_min(a.lat + a.vfov * 0.5, b.lat + b.vfov * 0.5) -
                            pick_max(a.lat - a.vfov * 0.5, b.lat - b.vfov * 0.5));
  const T inter = w * h;
  const T uni = a.hfov * a.vfov + b.hfov * b.vfov - inter;
  if (!(value_of(uni) > 0.0)) return T(0.0);
  return inter / uni;
}

inline AngularRect<double> rect_of(const BFoV& b) {
  return {b.center.lon, b.center.lat, b.hfov, b.vfov};
}

inline double bfov_iou(const BFoV& a, const BFoV& b) {
  // evaluate in a canonical order so the result is exactly symmetric
  const bool swap = std::tie(a.center.lon, a.center.lat, a.hfov, a.vfov) >
                    std::tie(b.center.lon, b.center.lat, b.hfov, b.vfov);
  return swap ? angular_rect_iou(rect_of(b), rect_of(a)) : angular_rect_iou(rect_of(a), rect_of(b));
}

namespace detail {

inline bool touches_right_border(const BFoV& b, double eps) {
  return std::abs(b.center.lon + 0.5 * b.hfov - kPi) <= eps;
}
inline bool touches_left_border(const BFoV& b, double eps) {
  return std::abs(b.center.lon - 0.5 * b.hfov + kPi) <= eps;
}

inline double interval_iou(double a0, double a1, double b0, double b1) {
  const double inter = std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
  const double uni = (a1 - a0) + (b1 - b0) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace detail

/// Merges detections split across the panorama seam and suppresses duplicates.
///
/// A fragment ending at lon = +pi and a fragment of the same category starting at
/// lon = -pi whose latitude ranges overlap by at least `iou_threshold` (1-D IoU)
/// are joined into one box spanning the seam. Then greedy per-category NMS with
/// wrap-aware IoU keeps the highest score. Output longitudes lie in [-pi, pi).
inline std::vector<BFoV> extend_and_merge(std::vector<BFoV> detections, double iou_threshold = 0.5,
                                          double border_eps = 1e-3) {
  // Seam merge: pair fragments greedily by combined score.
  std::vector<bool> used(detections.size(), false);
  std::vector<BFoV> merged;
  struct Candidate {
    double score;
    std::size_t right, left;
  };
  std::vector<Candidate> pairs;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (!detail::touches_right_border(detections[i], border_eps)) continue;
    for (std::size_t j = 0; j < detections.size(); ++j) {
      if (i == j || !detail::touches_left_border(detections[j], border_eps)) continue;
      const BFoV& r = detections[i];
      const BFoV& l = detections[j];
      if (r.category != l.category) continue;
      const double lat_iou =
          detail::interval_iou(r.center.lat - 0.5 * r.vfov, r.center.lat + 0.5 * r.vfov,
                               l.center.lat - 0.5 * l.vfov, l.center.lat + 0.5 * l.vfov);
      if (lat_iou >= iou_threshold) pairs.push_back({r.score + l.score, i, j});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  for (const auto& c : pairs) {
    if (used[c.right] || used[c.left]) continue;
    used[c.right] = used[c.left] = true;
    const BFoV& r = detections[c.right];
    const BFoV& l = detections[c.left];
    const double lon0 = r.center.lon - 0.5 * r.hfov;
    const double lon1 = l.center.lon + 0.5 * l.hfov + kTwoPi;
    const double lat0 = std::min(r.center.lat - 0.5 * r.vfov, l.center.lat - 0.5 * l.vfov);
    const double lat1 = std::max(r.center.lat + 0.5 * r.vfov, l.center.lat + 0.5 * l.vfov);
    BFoV m;
    m.center = {wrap_angle(0.5 * (lon0 + lon1)), 0.5 * (lat0 + lat1)};
    m.hfov = lon1 - lon0;
    m.vfov = lat1 - lat0;
    m.score = std::max(r.score, l.score);
    m.category = r.category;
    merged.push_back(m);
  }
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (!used[i]) {
      BFoV d = detections[i];
      d.center.lon = wrap_angle(d.center.lon);
      merged.push_back(d);
    }
  }

  std::vector<std::size_t> order(merged.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return merged[a].score > merged[b].score; });
  std::vector<BFoV> kept;
  for (std::size_t idx : order) {
    const BFoV& cand = merged[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const BFoV& k) {
      return k.category == cand.category && bfov_iou(k, cand) > iou_threshold;
    });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

}  // namespace relopt
