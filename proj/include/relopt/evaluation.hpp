#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "relopt/collision.hpp"
#include "relopt/error.hpp"
#include "relopt/scene.hpp"

namespace relopt {

// ---------------------------------------------------------------------------
// 3D IoU of yaw-only boxes: footprint polygon clipping times vertical overlap.

namespace detail {

inline std::vector<Vec2d> footprint(const OrientedBox& b) {
  const auto c = box_corners(b);
  return {{c[0].x, c[0].z}, {c[1].x, c[1].z}, {c[2].x, c[2].z}, {c[3].x, c[3].z}};
}

/// Sutherland-Hodgman: keeps the part of `subject` left of every edge of the
/// counter-clockwise convex polygon `clip`.
inline std::vector<Vec2d> clip_convex(std::vector<Vec2d> subject, std::span<const Vec2d> clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Vec2d a = clip[e];
    const Vec2d b = clip[(e + 1) % clip.size()];
    auto side = [&](const Vec2d& p) { return (b.x - a.x) * (p.z - a.z) - (b.z - a.z) * (p.x - a.x); };
    std::vector<Vec2d> out;
    out.reserve(subject.size() + 2);
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Vec2d p = subject[i];
      const Vec2d q = subject[(i + 1) % subject.size()];
      const double sp = side(p), sq = side(q);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) {
        const double t = sp / (sp - sq);
        out.push_back({p.x + t * (q.x - p.x), p.z + t * (q.z - p.z)});
      }
    }
    subject = std::move(out);
  }
  return subject;
}

}  // namespace detail

inline double iou3d(const OrientedBox& a_in, const OrientedBox& b_in) {
  const bool keep = detail::canonical_first(a_in, b_in);
  const OrientedBox& a = keep ? a_in : b_in;
  const OrientedBox& b = keep ? b_in : a_in;
  const auto fb = detail::footprint(b);
  const auto inter_poly = detail::clip_convex(detail::footprint(a), fb);
  const double area = inter_poly.size() >= 3 ? std::abs(signed_area(inter_poly)) : 0.0;
  const double h = std::max(0.0, std::min(a.top(), b.top()) - std::max(a.bottom(), b.bottom()));
  const double inter = area * h;
  const double va = a.size.x * a.size.y * a.size.z;
  const double vb = b.size.x * b.size.y * b.size.z;
  const double uni = va + vb - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

// ---------------------------------------------------------------------------
// Detection AP

struct DetectionResult {
  struct Prediction {
    OrientedBox box;
    int category = 0;
    double confidence = 1.0;
  };
  struct GroundTruth {
    OrientedBox box;
    int category = 0;
  };
  struct SceneEntry {
    std::vector<Prediction> predictions;
    std::vector<GroundTruth> ground_truth;
  };
  std::vector<SceneEntry> scenes;
};

/// All-point interpolated AP for one category; nullopt when the category has
/// no ground truth. Predictions are matched greedily in descending confidence
/// to the best unmatched ground truth of the same scene with IoU >= threshold.
inline std::optional<double> average_precision(const DetectionResult& results, int category,
                                               double iou_threshold = 0.15) {
  struct Item {
    double confidence;
    std::size_t scene, index;
  };
  std::vector<Item> items;
  std::size_t num_gt = 0;
  for (std::size_t s = 0; s < results.scenes.size(); ++s) {
    const auto& sc = results.scenes[s];
    for (std::size_t k = 0; k < sc.predictions.size(); ++k) {
      require(sc.predictions[k].confidence >= 0.0 && sc.predictions[k].confidence <= 1.0,
              "average_precision: confidence outside [0, 1]");
      if (sc.predictions[k].category == category) items.push_back({sc.predictions[k].confidence, s, k});
    }
    for (const auto& g : sc.ground_truth) num_gt += g.category == category;
  }
  if (num_gt == 0) return std::nullopt;
  std::stable_sort(items.begin(), items.end(),
                   [](const Item& a, const Item& b) { return a.confidence > b.confidence; });

  std::vector<std::vector<bool>> matched(results.scenes.size());
  for (std::size_t s = 0; s < results.scenes.size(); ++s)
    matched[s].assign(results.scenes[s].ground_truth.size(), false);

  std::vector<double> precision, recall;
  std::size_t tp = 0, fp = 0;
  for (const auto& it : items) {
    const auto& sc = results.scenes[it.scene];
    const auto& pred = sc.predictions[it.index];
    double best = -1.0;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < sc.ground_truth.size(); ++k) {
      if (matched[it.scene][k] || sc.ground_truth[k].category != category) continue;
      const double iou = iou3d(pred.box, sc.ground_truth[k].box);
      if (iou > best) {
        best = iou;
        best_k = k;
      }
    }
    if (best >= iou_threshold) {
      matched[it.scene][best_k] = true;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
  }
  // precision envelope, then area under the step curve
  for (std::size_t k = precision.size(); k-- > 1;)
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

struct MapReport {
  std::map<int, double> per_category;
  double mean = 0.0;
};

/// Mean AP over categories present in the ground truth.
inline MapReport mean_average_precision(const DetectionResult& results,
                                        double iou_threshold = 0.15) {
  std::set<int> cats;
  for (const auto& sc : results.scenes)
    for (const auto& g : sc.ground_truth) cats.insert(g.category);
  MapReport rep;
  for (int c : cats) rep.per_category[c] = *average_precision(results, c, iou_threshold);
  if (!cats.empty()) {
    double sum = 0.0;
    for (const auto& [c, ap] : rep.per_category) sum += ap;
    rep.mean = sum / static_cast<double>(cats.size());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Physical violation statistics

struct CollisionStats {
  double collision_times = 0.0;   // colliding object pairs per scene
  double objects_with_object = 0.0;
  double objects_with_ceiling = 0.0;
  double objects_with_floor = 0.0;
  double objects_with_wall = 0.0;
};

struct SceneCollisions {
  int pairs = 0;
  int with_object = 0, with_ceiling = 0, with_floor = 0, with_wall = 0;
};

/// Boxes shrink by tolerance / 2 per side before testing, so contacts closer
/// than the tolerance are forgiven. A negative tolerance expands them instead.
inline SceneCollisions count_collisions(std::span<const OrientedBox> boxes,
                                        const LayoutShell& layout, double tolerance) {
  std::vector<OrientedBox> shrunk;
  shrunk.reserve(boxes.size());
  for (const auto& b : boxes) {
    OrientedBox s = expanded(b, -0.5 * tolerance);
    s.size = {std::max(s.size.x, 0.0), std::max(s.size.y, 0.0), std::max(s.size.z, 0.0)};
    shrunk.push_back(s);
  }
  SceneCollisions c;
  std::vector<bool> hit(shrunk.size(), false);
  for (std::size_t i = 0; i < shrunk.size(); ++i) {
    for (std::size_t j = i + 1; j < shrunk.size(); ++j) {
      if (boxes_collide(shrunk[i], shrunk[j])) {
        ++c.pairs;
        hit[i] = hit[j] = true;
      }
    }
  }
  for (std::size_t i = 0; i < shrunk.size(); ++i) {
    const auto& b = shrunk[i];
    c.with_object += hit[i];
    c.with_floor += b.bottom() < layout.floor_y;
    c.with_ceiling += b.top() > layout.ceiling_y;
    bool outside = false;
    for (const auto& p : box_corners(b))
      outside = outside || !point_in_polygon({p.x, p.z}, layout.floor_polygon);
    c.with_wall += outside;
  }
  return c;
}

inline CollisionStats collision_stats(std::span<const Scene> scenes, double tolerance = 0.1) {
  CollisionStats s;
  if (scenes.empty()) return s;
  for (const auto& sc : scenes) {
    const auto boxes = sc.object_boxes();
    const auto c = count_collisions(boxes, sc.layout(), tolerance);
    s.collision_times += c.pairs;
    s.objects_with_object += c.with_object;
    s.objects_with_ceiling += c.with_ceiling;
    s.objects_with_floor += c.with_floor;
    s.objects_with_wall += c.with_wall;
  }
  const double n = static_cast<double>(scenes.size());
  s.collision_times /= n;
  s.objects_with_object /= n;
  s.objects_with_ceiling /= n;
  s.objects_with_floor /= n;
  s.objects_with_wall /= n;
  return s;
}

// ---------------------------------------------------------------------------
// Sphere-sampled semantic IoU

inline constexpr int kLabelWall = -1;
inline constexpr int kLabelFloor = -2;
inline constexpr int kLabelCeiling = -3;

/// Deterministic near-uniform directions on the unit sphere.
inline std::vector<Vec3d> fibonacci_sphere(int samples) {
  require(samples >= 1, "fibonacci_sphere: samples must be >= 1");
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3d> dirs;
  dirs.reserve(static_cast<std::size_t>(samples));
  for (int k = 0; k < samples; ++k) {
    const double y = 1.0 - 2.0 * (k + 0.5) / samples;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi = golden * k;
    dirs.push_back({r * std::cos(phi), y, r * std::sin(phi)});
  }
  return dirs;
}

/// Entry distance of a ray from the origin into the box (slab method in the
/// box frame); nullopt on a miss. 0 when the origin is inside.
inline std::optional<double> ray_box_hit(const Vec3d& dir, const OrientedBox& box) {
  const Vec3d ax = box.axis_x(), az = box.axis_z();
  const Vec3d rel{-box.center.x, -box.center.y, -box.center.z};
  const std::array<double, 3> o{dot(rel, ax), rel.y, dot(rel, az)};
  const std::array<double, 3> d{dot(dir, ax), dir.y, dot(dir, az)};
  const std::array<double, 3> h{0.5 * box.size.x, 0.5 * box.size.y, 0.5 * box.size.z};
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-300) {
      if (std::abs(o[k]) > h[k]) return std::nullopt;
      continue;
    }
    double a = (-h[k] - o[k]) / d[k];
    double b = (h[k] - o[k]) / d[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (t0 > t1 || t1 < 0.0) return std::nullopt;
  return std::max(t0, 0.0);
}

/// Label seen along `dir`: nearest object category, else floor, ceiling or wall.
inline int label_ray(const Vec3d& dir, std::span<const OrientedBox> boxes,
                     std::span<const int> categories, const LayoutShell& layout) {
  double best = std::numeric_limits<double>::infinity();
  int label = kLabelWall;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (const auto t = ray_box_hit(dir, boxes[i]); t && *t < best) {
      best = *t;
      label = categories[i];
    }
  }
  // first crossing of a wall segment in the horizontal plane
  double t_wall = std::numeric_limits<double>::infinity();
  const auto& poly = layout.floor_polygon;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2d a = poly[i], b = poly[(i + 1) % poly.size()];
    const Vec2d e{b.x - a.x, b.z - a.z};
    const double den = dir.x * e.z - dir.z * e.x;
    if (std::abs(den) < 1e-15) continue;
    const double t = (a.x * e.z - a.z * e.x) / den;
    const double s = (a.x * dir.z - a.z * dir.x) / den;
    if (t > 0.0 && s >= 0.0 && s <= 1.0) t_wall = std::min(t_wall, t);
  }
  double t_plane = std::numeric_limits<double>::infinity();
  int plane_label = kLabelWall;
  if (dir.y < 0.0) {
    t_plane = layout.floor_y / dir.y;
    plane_label = kLabelFloor;
  } else if (dir.y > 0.0) {
    t_plane = layout.ceiling_y / dir.y;
    plane_label = kLabelCeiling;
  }
  const double t_layout = std::min(t_wall, t_plane);
  if (best < t_layout) return label;
  return t_plane <= t_wall ? plane_label : kLabelWall;
}

inline std::vector<int> label_sphere(std::span<const OrientedBox> boxes,
                                    std::span<const int> categories, const LayoutShell& layout,
                                    int samples) {
  require(boxes.size() == categories.size(), "label_sphere: one category per box");
  std::vector<int> labels;
  for (const auto& d : fibonacci_sphere(samples))
    labels.push_back(label_ray(d, boxes, categories, layout));
  return labels;
}

struct SphereIoU {
  std::map<int, double> per_class;  // negative ids are wall / floor / ceiling
  double mean = 0.0;
};

/// Per-class IoU of the labels seen along `samples` directions, averaged over
/// classes present in either labelling.
inline SphereIoU semantic_sphere_iou(std::span<const OrientedBox> pred,
                                     std::span<const int> pred_categories,
                                     std::span<const OrientedBox> gt,
                                     std::span<const int> gt_categories, const LayoutShell& layout,
                                     int samples) {
  const auto lp = label_sphere(pred, pred_categories, layout, samples);
  const auto lg = label_sphere(gt, gt_categories, layout, samples);
  std::map<int, std::pair<int, int>> counts;  // class -> (intersection, union)
  for (std::size_t k = 0; k < lp.size(); ++k) {
    if (lp[k] == lg[k]) {
      ++counts[lp[k]].first;
      ++counts[lp[k]].second;
    } else {
      ++counts[lp[k]].second;
      ++counts[lg[k]].second;
    }
  }
  SphereIoU r;
  for (const auto& [cls, iu] : counts)
    r.per_class[cls] = static_cast<double>(iu.first) / static_cast<double>(iu.second);
  double sum = 0.0;
  for (const auto& [cls, v] : r.per_class) sum += v;
  r.mean = r.per_class.empty() ? 0.0 : sum / static_cast<double>(r.per_class.size());
  return r;
}

inline SphereIoU semantic_sphere_iou(const Scene& pred, const Scene& gt, int samples) {
  std::vector<int> pc, gc;
  for (const auto& o : pred.objects()) pc.push_back(o.category);
  for (const auto& o : gt.objects()) gc.push_back(o.category);
  const auto pb = pred.object_boxes(), gb = gt.object_boxes();
  return semantic_sphere_iou(pb, pc, gb, gc, pred.layout(), samples);
}

}  // namespace relopt
