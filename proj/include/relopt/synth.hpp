#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "relopt/collision.hpp"
#include "relopt/energy.hpp"
#include "relopt/error.hpp"
#include "relopt/pano.hpp"
#include "relopt/relations.hpp"
#include "relopt/scene.hpp"

namespace relopt {

struct CategoryPrior {
  int id = 0;
  std::string name;
  Vec3d size_min;  // full extents (width x, height y, depth z)
  Vec3d size_max;
  double weight = 1.0;
};

inline std::vector<CategoryPrior> default_category_priors() {
  return {
      {0, "bed", {1.4, 0.4, 1.9}, {1.9, 0.6, 2.2}, 0.6},
      {1, "chair", {0.4, 0.8, 0.4}, {0.6, 1.0, 0.6}, 1.4},
      {2, "sofa", {1.6, 0.7, 0.8}, {2.4, 0.9, 1.0}, 0.8},
      {3, "table", {0.8, 0.7, 0.8}, {1.6, 0.8, 1.0}, 1.0},
      {4, "desk", {1.0, 0.7, 0.5}, {1.6, 0.8, 0.8}, 0.8},
      {5, "cabinet", {0.5, 0.8, 0.4}, {1.2, 2.0, 0.6}, 1.0},
      {6, "shelf", {0.6, 1.2, 0.3}, {1.2, 2.2, 0.45}, 0.8},
      {7, "nightstand", {0.4, 0.45, 0.35}, {0.6, 0.65, 0.5}, 0.8},
      {8, "tv_stand", {1.0, 0.4, 0.35}, {1.8, 0.6, 0.5}, 0.6},
      {9, "dresser", {0.8, 0.8, 0.45}, {1.4, 1.2, 0.6}, 0.6},
  };
}

enum class RoomShape { Rectangle, LShape, Mixed };

struct NoiseSpec {
  double sigma_center = 0.3;            // meters, per axis
  double sigma_yaw = 15.0 * kPi / 180;  // radians
  double sigma_size = 0.1;              // log scale, per axis

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// How perturb_scene treats the detections.
enum class DetectionMode {
  Perturbed,    // re-derived from the perturbed boxes
  GroundTruth,  // kept from the input; only the poses move
};

struct GenConfig {
  std::uint64_t seed = 0;
  RoomShape shape = RoomShape::Mixed;
  double l_shape_probability = 0.3;
  double room_min = 4.0;  // side length, meters
  double room_max = 7.0;
  double height_min = 2.6;
  double height_max = 3.0;
  int min_objects = 5;
  int max_objects = 10;
  std::vector<CategoryPrior> categories = default_category_priors();
  double wall_attach_probability = 0.55;
  double adjacency_probability = 0.25;
  double diagonal_yaw_probability = 0.15;
  double camera_height = 1.6;
  double camera_clearance = 0.5;
  double camera_grid = 0.1;
  bool rotate_room = true;
  int max_attempts = 1000;
  int max_scene_attempts = 20;
  double relation_tolerance = 0.1;

  void validate() const {
    require(room_min > 0.0 && room_max >= room_min, "generate: invalid room size range");
    require(height_min > 0.0 && height_max >= height_min, "generate: invalid height range");
    require(min_objects >= 0 && max_objects >= min_objects, "generate: invalid object count range");
    require(max_objects == 0 || !categories.empty(), "generate: no categories");
    for (const auto& c : categories) {
      require(c.size_min.x > 0 && c.size_min.y > 0 && c.size_min.z > 0 &&
                  c.size_max.x >= c.size_min.x && c.size_max.y >= c.size_min.y &&
                  c.size_max.z >= c.size_min.z && c.weight > 0,
              "generate: invalid prior for category '" + c.name + "'");
    }
    require(camera_height > 0.0 && camera_height < height_min,
            "generate: camera must sit below the lowest ceiling");
    require(camera_clearance >= 0.0 && camera_grid > 0.0, "generate: invalid camera grid");
    require(max_attempts >= 1 && max_scene_attempts >= 1, "generate: attempts must be >= 1");
    require(relation_tolerance >= 0.0, "generate: relation_tolerance must be >= 0");
  }
};

struct GeneratedScene {
  Scene scene;
  RelationSet relations;
  std::vector<OrientedBox> ground_truth;
};

namespace synth_detail {

// Touching surfaces are separated by this much: far below the attachment
// dead zone, far above rounding noise.
inline constexpr double kTouchGap = 5e-8;
// Anything not touching keeps at least this clearance, beyond the relation tolerance.
inline constexpr double kClearMargin = 0.02;

inline double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

inline bool coin(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

inline LayoutShell sample_room(const GenConfig& cfg, std::mt19937_64& rng) {
  const double w = uniform(rng, cfg.room_min, cfg.room_max);
  const double d = uniform(rng, cfg.room_min, cfg.room_max);
  const double h = uniform(rng, cfg.height_min, cfg.height_max);
  const double floor_y = -cfg.camera_height;
  const double ceil_y = h - cfg.camera_height;
  bool l_shape = cfg.shape == RoomShape::LShape;
  if (cfg.shape == RoomShape::Mixed) l_shape = coin(rng, cfg.l_shape_probability);
  if (!l_shape) return rectangle_layout(0.0, w, 0.0, d, floor_y, ceil_y);
  // notch cut from the (+x, +z) corner
  const double wx = w * uniform(rng, 0.5, 0.7);
  const double dz = d * uniform(rng, 0.5, 0.7);
  return make_layout({{0.0, 0.0}, {w, 0.0}, {w, dz}, {wx, dz}, {wx, d}, {0.0, d}}, floor_y, ceil_y);
}

inline const CategoryPrior& sample_category(const GenConfig& cfg, std::mt19937_64& rng) {
  std::vector<double> w;
  for (const auto& c : cfg.categories) w.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  return cfg.categories[pick(rng)];
}

/// Sum of positive separating gaps, or nullopt when the boxes overlap.
inline std::optional<double> separation(const OrientedBox& a, const OrientedBox& b) {
  const auto prof = sat_profile(a, b);
  if (prof.colliding) return std::nullopt;
  double s = 0.0;
  for (double g : prof.gaps) s += std::max(g, 0.0);
  return s;
}

/// Every neighbour is either clearly touching or clearly apart.
inline bool fits(const OrientedBox& box, const std::vector<OrientedBox>& placed,
                 const std::vector<OrientedBox>& walls, const LayoutShell& layout,
                 double tolerance) {
  const double far = tolerance + kClearMargin;
  for (const auto& c : box_corners(box))
    if (!point_in_polygon({c.x, c.z}, layout.floor_polygon)) return false;
  if (box.top() > layout.ceiling_y - far) return false;
  auto ok = [&](const OrientedBox& other) {
    if (!contact_test(box, other, far)) return true;
    const auto sep = separation(box, other);
    return sep && *sep <= 2.0 * kTouchGap && *sep > 0.0;
  };
  for (const auto& o : placed)
    if (!ok(o)) return false;
  for (const auto& w : walls)
    if (!ok(w)) return false;
  return true;
}

inline double point_rect_distance(const Vec2d& p, const OrientedBox& b) {
  const Vec3d rel{p.x - b.center.x, 0.0, p.z - b.center.z};
  const double ex = std::max(std::abs(dot(rel, b.axis_x())) - 0.5 * b.size.x, 0.0);
  const double ez = std::max(std::abs(dot(rel, b.axis_z())) - 0.5 * b.size.z, 0.0);
  return std::hypot(ex, ez);
}

inline Vec2d rotate_quarter(const Vec2d& p, int k) {
  Vec2d r = p;
  for (int i = 0; i < k; ++i) r = {r.z, -r.x};
  return r;
}

inline std::optional<GeneratedScene> try_generate(const GenConfig& cfg, std::mt19937_64& rng) {
  const LayoutShell room = sample_room(cfg, rng);
  const auto walls = walls_from_layout(room);
  const auto& poly = room.floor_polygon;
  double x0 = poly[0].x, x1 = poly[0].x, z0 = poly[0].z, z1 = poly[0].z;
  for (const auto& p : poly) {
    x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
    z0 = std::min(z0, p.z), z1 = std::max(z1, p.z);
  }

  const int count = std::uniform_int_distribution<int>(cfg.min_objects, cfg.max_objects)(rng);
  std::vector<OrientedBox> placed;
  std::vector<int> cats;
  for (int k = 0; k < count; ++k) {
    const CategoryPrior& cat = sample_category(cfg, rng);
    bool done = false;
    for (int attempt = 0; attempt < cfg.max_attempts && !done; ++attempt) {
      OrientedBox b;
      b.size = {uniform(rng, cat.size_min.x, cat.size_max.x),
                uniform(rng, cat.size_min.y, cat.size_max.y),
                uniform(rng, cat.size_min.z, cat.size_max.z)};
      b.center.y = room.floor_y + kTouchGap + 0.5 * b.size.y;
      const double mode = uniform(rng, 0.0, 1.0);
      if (mode < cfg.wall_attach_probability) {
        const std::size_t e = std::uniform_int_distribution<std::size_t>(0, walls.size() - 1)(rng);
        const Vec2d p = poly[e], q = poly[(e + 1) % poly.size()];
        const double len = std::hypot(q.x - p.x, q.z - p.z);
        if (len < b.size.x + 2 * kTouchGap) continue;
        const Vec2d dir{(q.x - p.x) / len, (q.z - p.z) / len};
        const Vec2d inward{-dir.z, dir.x};
        double t = uniform(rng, 0.5 * b.size.x, len - 0.5 * b.size.x);
        const double far = cfg.relation_tolerance + kClearMargin;
        // snap into a corner rather than leave an ambiguous sliver
        if (t - 0.5 * b.size.x < far) t = 0.5 * b.size.x + kTouchGap;
        if (len - t - 0.5 * b.size.x < far) t = len - 0.5 * b.size.x - kTouchGap;
        const double off = 0.5 * b.size.z + kTouchGap;
        b.center.x = p.x + dir.x * t + inward.x * off;
        b.center.z = p.z + dir.z * t + inward.z * off;
        b.yaw = walls[e].yaw;
      } else if (!placed.empty() && mode < cfg.wall_attach_probability + cfg.adjacency_probability) {
        const auto& a = placed[std::uniform_int_distribution<std::size_t>(0, placed.size() - 1)(rng)];
        const double side = coin(rng, 0.5) ? 1.0 : -1.0;
        const double along = side * (0.5 * a.size.x + 0.5 * b.size.x + kTouchGap);
        const double back = -0.5 * a.size.z + 0.5 * b.size.z;
        const Vec3d ax = a.axis_x(), az = a.axis_z();
        b.center.x = a.center.x + ax.x * along + az.x * back;
        b.center.z = a.center.z + ax.z * along + az.z * back;
        b.yaw = a.yaw;
      } else {
        b.center.x = uniform(rng, x0, x1);
        b.center.z = uniform(rng, z0, z1);
        const bool diag = coin(rng, cfg.diagonal_yaw_probability);
        const int q = std::uniform_int_distribution<int>(0, 3)(rng);
        b.yaw = wrap_angle(q * kPi / 2 + (diag ? kPi / 4 : 0.0));
      }
      if (fits(b, placed, walls, room, cfg.relation_tolerance)) {
        placed.push_back(b);
        cats.push_back(cat.id);
        done = true;
      }
    }
    if (!done) return std::nullopt;
  }

  // camera: a free cell of the occupancy grid
  std::vector<Vec2d> free_cells;
  const int nx = static_cast<int>(std::floor((x1 - x0) / cfg.camera_grid));
  const int nz = static_cast<int>(std::floor((z1 - z0) / cfg.camera_grid));
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nz; ++j) {
      const Vec2d c{x0 + (i + 0.5) * cfg.camera_grid, z0 + (j + 0.5) * cfg.camera_grid};
      if (!point_in_polygon(c, poly)) continue;
      if (distance_to_boundary(c, std::span<const Vec2d>(poly)) < cfg.camera_clearance) continue;
      bool clear = true;
      for (const auto& b : placed) clear = clear && point_rect_distance(c, b) >= cfg.camera_clearance;
      if (clear) free_cells.push_back(c);
    }
  }
  std::shuffle(free_cells.begin(), free_cells.end(), rng);
  const int turns = cfg.rotate_room ? std::uniform_int_distribution<int>(0, 3)(rng) : 0;

  for (const Vec2d& cam : free_cells) {
    std::vector<Vec2d> wpoly;
    for (const auto& p : poly) wpoly.push_back(rotate_quarter({p.x - cam.x, p.z - cam.z}, turns));
    std::vector<OrientedBox> world;
    bool visible = true;
    for (const auto& b : placed) {
      OrientedBox w = b;
      const Vec2d c = rotate_quarter({b.center.x - cam.x, b.center.z - cam.z}, turns);
      w.center = {c.x, b.center.y, c.z};
      w.yaw = wrap_angle(b.yaw + turns * kPi / 2);
      visible = visible && project_box_to_tangent(w).has_value();
      world.push_back(w);
    }
    if (!visible) continue;

    const LayoutShell layout = make_layout(wpoly, room.floor_y, room.ceiling_y, room.wall_thickness);
    std::vector<ObjectInstance> objects;
    for (std::size_t i = 0; i < world.size(); ++i) {
      const auto t = project_box_to_tangent(world[i]);
      BFoV det = bfov_of_tangent_box(*t, dir_to_lonlat(world[i].center));
      det.category = cats[i];
      det.score = 1.0;
      objects.emplace_back(static_cast<int>(i), cats[i], det, box_to_pose(world[i], det.center));
    }
    Scene scene(CameraFrame{cfg.camera_height}, layout, std::move(objects));
    RelationSet rel = extract_relations(scene, cfg.relation_tolerance);
    // the ground truth must be a fixpoint of the physical and relation terms
    const auto rep = EnergyModel(scene, &rel, EnergyConfig{}).evaluate(scene.poses(), false);
    const auto& t = rep.terms;
    if (rep.collision != 0.0 || t[index_of(Term::ObjectAttachment)] != 0.0 ||
        t[index_of(Term::FloorAttachment)] != 0.0 || t[index_of(Term::CeilingAttachment)] != 0.0 ||
        t[index_of(Term::RelativeDistance)] != 0.0)
      return std::nullopt;
    auto gt = scene.object_boxes();
    return GeneratedScene{std::move(scene), std::move(rel), std::move(gt)};
  }
  return std::nullopt;
}

}  // namespace synth_detail

/// Random Manhattan room with furniture, camera at the origin, exact
/// ground-truth relations and detections. Deterministic in cfg.seed.
inline GeneratedScene generate_scene(const GenConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  for (int attempt = 0; attempt < cfg.max_scene_attempts; ++attempt) {
    if (auto g = synth_detail::try_generate(cfg, rng)) return std::move(*g);
  }
  throw DataError("generate: could not place objects after " + std::to_string(cfg.max_attempts) +
                  " attempts per object in " + std::to_string(cfg.max_scene_attempts) +
                  " rooms; lower max_objects or enlarge the room range");
}

/// Gaussian noise on each object's 3D center, yaw and log-size. Initial poses
/// are reset to the perturbed poses.
inline Scene perturb_scene(const Scene& scene, const NoiseSpec& noise, std::uint64_t seed,
                           DetectionMode mode = DetectionMode::Perturbed) {
  require(noise.sigma_center >= 0 && noise.sigma_yaw >= 0 && noise.sigma_size >= 0,
          "perturb: noise sigmas must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<ObjectInstance> objects;
  for (const auto& o : scene.objects()) {
    OrientedBox b = o.box();
    b.center.x += noise.sigma_center * g(rng);
    b.center.y += noise.sigma_center * g(rng);
    b.center.z += noise.sigma_center * g(rng);
    b.yaw = wrap_angle(b.yaw + noise.sigma_yaw * g(rng));
    b.size.x *= std::exp(noise.sigma_size * g(rng));
    b.size.y *= std::exp(noise.sigma_size * g(rng));
    b.size.z *= std::exp(noise.sigma_size * g(rng));
    require(norm(b.center) > 0.0, "perturb: object center moved onto the camera");
    BFoV det = o.detection;
    if (mode == DetectionMode::Perturbed) {
      if (const auto t = project_box_to_tangent(b)) {
        det = bfov_of_tangent_box(*t, dir_to_lonlat(b.center));
        det.score = o.detection.score;
        det.category = o.detection.category;
      }
    }
    const PoseParams p = box_to_pose(b, det.center);
    objects.emplace_back(o.id, o.category, det, p, p, o.in_room_likelihood);
  }
  return Scene(scene.camera(), scene.layout(), std::move(objects));
}

}  // namespace relopt
