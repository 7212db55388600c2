#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relopt/error.hpp"
#include "relopt/math.hpp"

// World frame: y up, camera at the origin, floor at y = -camera height.
// Objects rotate about y only. A yaw of `a` rotates the local +z axis
// (the object's front) toward +x: local +z maps to (sin a, 0, cos a).

namespace relopt {

struct CameraFrame {
  double height_above_floor = 1.6;

  double floor_y() const { return -height_above_floor; }

  friend bool operator==(const CameraFrame&, const CameraFrame&) = default;
};

/// Viewing direction. lon in [-pi, pi), lat in [-pi/2, pi/2].
struct SphericalDir {
  double lon = 0.0;
  double lat = 0.0;

  friend bool operator==(const SphericalDir&, const SphericalDir&) = default;
};

/// Unit direction for (lon, lat): (cos lat sin lon, sin lat, cos lat cos lon).
template <class T>
Vec3<T> direction(const T& lon, const T& lat) {
  using std::cos;
  using std::sin;
  const T cl = cos(lat);
  return {cl * sin(lon), sin(lat), cl * cos(lon)};
}

/// Bounding field of view: a panorama detection box.
struct BFoV {
  SphericalDir center;
  double hfov = 0.0;
  double vfov = 0.0;
  double score = 1.0;
  int category = 0;

  friend bool operator==(const BFoV&, const BFoV&) = default;
};

/// Optimized per-object variables: angular offset from the detection center to
/// the projected cuboid center, camera distance, full extents, and yaw in the
/// frame of the perspective crop centred on that projection.
template <class T>
struct BasicPose {
  T delta_lon{};
  T delta_lat{};
  T dist{1.0};
  Vec3<T> size{T(1.0), T(1.0), T(1.0)};
  T theta{};

  friend bool operator==(const BasicPose&, const BasicPose&) = default;
};

using PoseParams = BasicPose<double>;

inline constexpr std::size_t kParamsPerObject = 7;

/// Flat order used by gradients and optimizers.
enum class PoseParam : int { DeltaLon = 0, DeltaLat, Dist, SizeX, SizeY, SizeZ, Theta };

inline std::array<double, kParamsPerObject> flatten(const PoseParams& p) {
  return {p.delta_lon, p.delta_lat, p.dist, p.size.x, p.size.y, p.size.z, p.theta};
}

inline PoseParams unflatten(std::span<const double> v) {
  return {v[0], v[1], v[2], {v[3], v[4], v[5]}, v[6]};
}

inline const char* param_name(std::size_t k) {
  static constexpr const char* kNames[] = {"delta_lon", "delta_lat", "dist", "size_x",
                                           "size_y",    "size_z",    "theta"};
  return kNames[k];
}

/// Yaw-only cuboid. `size` holds full extents along local x, y, z.
template <class T>
struct BasicBox {
  Vec3<T> center{};
  Vec3<T> size{T(1.0), T(1.0), T(1.0)};
  T yaw{};

  /// Local +x and +z axes in world coordinates.
  Vec3<T> axis_x() const {
    using std::cos;
    using std::sin;
    return {cos(yaw), T(0.0), -sin(yaw)};
  }
  Vec3<T> axis_z() const {
    using std::cos;
    using std::sin;
    return {sin(yaw), T(0.0), cos(yaw)};
  }
  T bottom() const { return center.y - size.y * 0.5; }
  T top() const { return center.y + size.y * 0.5; }

  friend bool operator==(const BasicBox&, const BasicBox&) = default;
};

using OrientedBox = BasicBox<double>;

template <class T>
BasicBox<T> pose_to_box(const BasicPose<T>& pose, const SphericalDir& detection_center) {
  const T lon = detection_center.lon + pose.delta_lon;
  const T lat = detection_center.lat + pose.delta_lat;
  BasicBox<T> box;
  box.center = direction(lon, lat) * pose.dist;
  box.size = pose.size;
  box.yaw = wrap_angle(pose.theta + lon);
  return box;
}

/// Inverse of pose_to_box for a fixed detection center. Exact for poses with
/// delta_lon and theta in [-pi, pi) and the center latitude inside [-pi/2, pi/2].
inline PoseParams box_to_pose(const OrientedBox& box, const SphericalDir& detection_center) {
  const Vec3d& c = box.center;
  const double lon = std::atan2(c.x, c.z);
  const double lat = std::atan2(c.y, std::hypot(c.x, c.z));
  PoseParams p;
  p.delta_lon = wrap_angle(lon - detection_center.lon);
  p.delta_lat = lat - detection_center.lat;
  p.dist = norm(c);
  p.size = box.size;
  p.theta = wrap_angle(box.yaw - (detection_center.lon + p.delta_lon));
  return p;
}

/// Corner order: lower face then upper face, each counter-clockwise in the
/// (x, z) plane starting from local (-x, -z).
template <class T>
std::array<Vec3<T>, 8> box_corners(const BasicBox<T>& box) {
  static constexpr std::array<std::array<double, 2>, 4> kFace = {
      {{-1.0, -1.0}, {1.0, -1.0}, {1.0, 1.0}, {-1.0, 1.0}}};
  const Vec3<T> ax = box.axis_x();
  const Vec3<T> az = box.axis_z();
  const T hx = box.size.x * 0.5;
  const T hy = box.size.y * 0.5;
  const T hz = box.size.z * 0.5;
  std::array<Vec3<T>, 8> out;
  for (int level = 0; level < 2; ++level) {
    const T dy = level == 0 ? -hy : hy;
    for (int k = 0; k < 4; ++k) {
      const T sx = hx * kFace[k][0];
      const T sz = hz * kFace[k][1];
      out[level * 4 + k] = {box.center.x + ax.x * sx + az.x * sz, box.center.y + dy,
                            box.center.z + ax.z * sx + az.z * sz};
    }
  }
  return out;
}

inline OrientedBox expanded(OrientedBox box, double margin_per_side) {
  box.size = box.size + Vec3d{2 * margin_per_side, 2 * margin_per_side, 2 * margin_per_side};
  return box;
}

// ---------------------------------------------------------------------------
// Layout

/// Manhattan room: counter-clockwise floor polygon in (x, z) with
/// axis-parallel edges, horizontal floor and ceiling planes.
struct LayoutShell {
  std::vector<Vec2d> floor_polygon;
  double floor_y = -1.6;
  double ceiling_y = 1.4;
  double wall_thickness = 0.1;

  friend bool operator==(const LayoutShell&, const LayoutShell&) = default;
};

inline double signed_area(std::span<const Vec2d> poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2d& p = poly[i];
    const Vec2d& q = poly[(i + 1) % poly.size()];
    a += p.x * q.z - q.x * p.z;
  }
  return 0.5 * a;
}

namespace detail {

inline bool segments_touch(Vec2d a0, Vec2d a1, Vec2d b0, Vec2d b1) {
  // Axis-parallel segments: bounding-box overlap is exact intersection.
  const double ax0 = std::min(a0.x, a1.x), ax1 = std::max(a0.x, a1.x);
  const double az0 = std::min(a0.z, a1.z), az1 = std::max(a0.z, a1.z);
  const double bx0 = std::min(b0.x, b1.x), bx1 = std::max(b0.x, b1.x);
  const double bz0 = std::min(b0.z, b1.z), bz1 = std::max(b0.z, b1.z);
  return ax0 <= bx1 && bx0 <= ax1 && az0 <= bz1 && bz0 <= az1;
}

}  // namespace detail

/// Throws DataError unless the layout satisfies the Manhattan invariants.
/// A clockwise polygon is accepted and reversed; a repeated closing vertex is dropped.
inline LayoutShell make_layout(std::vector<Vec2d> polygon, double floor_y, double ceiling_y,
                               double wall_thickness = 0.1) {
  if (polygon.size() > 1 && polygon.front() == polygon.back()) polygon.pop_back();
  require(polygon.size() >= 4, "layout: floor polygon needs at least 4 vertices");
  require(ceiling_y > floor_y, "layout: ceiling_y must be above floor_y");
  require(wall_thickness > 0.0, "layout: wall_thickness must be positive");
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2d& p = polygon[i];
    const Vec2d& q = polygon[(i + 1) % n];
    require(std::isfinite(p.x) && std::isfinite(p.z), "layout: non-finite vertex");
    const bool along_x = p.z == q.z && p.x != q.x;
    const bool along_z = p.x == q.x && p.z != q.z;
    require(p.x != q.x || p.z != q.z, "layout: zero-length edge " + std::to_string(i));
    require(along_x || along_z, "layout: edge " + std::to_string(i) + " is not axis-parallel");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      require(!detail::segments_touch(polygon[i], polygon[(i + 1) % n], polygon[j],
                                      polygon[(j + 1) % n]),
              "layout: floor polygon is not simple");
    }
  }
  if (signed_area(polygon) < 0.0) std::reverse(polygon.begin(), polygon.end());
  return {std::move(polygon), floor_y, ceiling_y, wall_thickness};
}

inline LayoutShell rectangle_layout(double x0, double x1, double z0, double z1, double floor_y,
                                    double ceiling_y, double wall_thickness = 0.1) {
  return make_layout({{x0, z0}, {x1, z0}, {x1, z1}, {x0, z1}}, floor_y, ceiling_y, wall_thickness);
}

/// One cuboid per polygon edge, flush with the edge on the outside. Local x runs
/// along the edge and local +z (the front) faces into the room, so yaw is a
/// multiple of pi/2.
inline std::vector<OrientedBox> walls_from_layout(const LayoutShell& layout) {
  const auto& poly = layout.floor_polygon;
  const double height = layout.ceiling_y - layout.floor_y;
  std::vector<OrientedBox> walls;
  walls.reserve(poly.size());
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2d p = poly[i];
    const Vec2d q = poly[(i + 1) % poly.size()];
    const double len = std::hypot(q.x - p.x, q.z - p.z);
    require(len > 0.0, "layout: degenerate edge " + std::to_string(i));
    const Vec2d e{(q.x - p.x) / len, (q.z - p.z) / len};
    const Vec2d inward{-e.z, e.x};
    const double half = 0.5 * layout.wall_thickness;
    OrientedBox w;
    w.center = {0.5 * (p.x + q.x) - inward.x * half, 0.5 * (layout.floor_y + layout.ceiling_y),
                0.5 * (p.z + q.z) - inward.z * half};
    w.size = {len, height, layout.wall_thickness};
    // inward is axis-aligned, so this is exactly one of 0, pi/2, pi, -pi/2
    if (inward.z > 0.5)
      w.yaw = 0.0;
    else if (inward.x > 0.5)
      w.yaw = kPi / 2;
    else if (inward.z < -0.5)
      w.yaw = -kPi;
    else
      w.yaw = -kPi / 2;
    walls.push_back(w);
  }
  return walls;
}

// ---------------------------------------------------------------------------
// Objects and scenes

class ObjectInstance {
 public:
  ObjectInstance() = default;
  ObjectInstance(int id, int category, BFoV detection, PoseParams pose,
                 double in_room_likelihood = 1.0)
      : ObjectInstance(id, category, detection, pose, pose, in_room_likelihood) {}
  ObjectInstance(int id, int category, BFoV detection, PoseParams pose, PoseParams initial_pose,
                 double in_room_likelihood)
      : id(id),
        category(category),
        detection(detection),
        pose(pose),
        in_room_likelihood(in_room_likelihood),
        initial_(initial_pose) {}

  int id = 0;
  int category = 0;
  BFoV detection;
  PoseParams pose;
  double in_room_likelihood = 1.0;

  /// Anchor of the observation term; fixed at construction.
  const PoseParams& initial_pose() const { return initial_; }

  OrientedBox box() const { return pose_to_box(pose, detection.center); }

  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;

 private:
  PoseParams initial_;
};

inline void validate_pose(const PoseParams& p, const std::string& where) {
  require(std::isfinite(p.delta_lon) && std::isfinite(p.delta_lat) && std::isfinite(p.theta),
          where + ": non-finite angle");
  require(p.dist > 0.0, where + ".dist: must be > 0");
  require(p.size.x > 0.0 && p.size.y > 0.0 && p.size.z > 0.0, where + ".size: must be > 0");
}

class Scene {
 public:
  Scene() = default;
  Scene(CameraFrame camera, LayoutShell layout, std::vector<ObjectInstance> objects)
      : camera_(camera), layout_(std::move(layout)), objects_(std::move(objects)) {
    require(camera_.height_above_floor > 0.0, "camera: height_above_floor must be > 0");
    layout_ = make_layout(layout_.floor_polygon, layout_.floor_y, layout_.ceiling_y,
                          layout_.wall_thickness);
    walls_ = walls_from_layout(layout_);
    std::set<int> ids;
    for (std::size_t i = 0; i < objects_.size(); ++i) {
      const auto& o = objects_[i];
      const std::string where = "objects[" + std::to_string(i) + "]";
      require(ids.insert(o.id).second, where + ".id: duplicate id " + std::to_string(o.id));
      validate_pose(o.pose, where + ".pose");
      validate_pose(o.initial_pose(), where + ".initial_pose");
      require(o.in_room_likelihood >= 0.0 && o.in_room_likelihood <= 1.0,
              where + ".in_room_likelihood: must be in [0, 1]");
    }
  }

  const CameraFrame& camera() const { return camera_; }
  const LayoutShell& layout() const { return layout_; }
  const std::vector<ObjectInstance>& objects() const { return objects_; }
  const std::vector<OrientedBox>& walls() const { return walls_; }

  std::vector<OrientedBox> object_boxes() const {
    std::vector<OrientedBox> out;
    out.reserve(objects_.size());
    for (const auto& o : objects_) out.push_back(o.box());
    return out;
  }

  std::vector<PoseParams> poses() const {
    std::vector<PoseParams> out;
    out.reserve(objects_.size());
    for (const auto& o : objects_) out.push_back(o.pose);
    return out;
  }

  /// Same scene with every object's current pose replaced.
  Scene with_poses(std::span<const PoseParams> poses) const {
    require(poses.size() == objects_.size(), "with_poses: pose count mismatch");
    Scene s = *this;
    for (std::size_t i = 0; i < poses.size(); ++i) s.objects_[i].pose = poses[i];
    return s;
  }

  friend bool operator==(const Scene&, const Scene&) = default;

 private:
  CameraFrame camera_;
  LayoutShell layout_;
  std::vector<ObjectInstance> objects_;
  std::vector<OrientedBox> walls_;
};

}  // namespace relopt
