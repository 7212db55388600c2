#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "relopt/relopt.hpp"

namespace relopt::testing {

inline OrientedBox make_box(Vec3d center, Vec3d size, double yaw = 0.0) { return {center, size, yaw}; }

inline OrientedBox unit_cube(Vec3d center = {0, 0, 0}, double yaw = 0.0) {
  return {center, {1, 1, 1}, yaw};
}

inline OrientedBox random_box(std::mt19937_64& rng, double spread = 1.0) {
  std::uniform_real_distribution<double> c(-spread, spread), s(0.2, 1.5), y(-kPi, kPi);
  return {{c(rng), c(rng), c(rng)}, {s(rng), s(rng), s(rng)}, y(rng)};
}

/// True when world point p lies inside the box.
inline bool contains(const OrientedBox& b, const Vec3d& p) {
  const Vec3d rel = p - b.center;
  return std::abs(dot(rel, b.axis_x())) <= 0.5 * b.size.x && std::abs(rel.y) <= 0.5 * b.size.y &&
         std::abs(dot(rel, b.axis_z())) <= 0.5 * b.size.z;
}

inline Vec3d sample_in(const OrientedBox& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const double lx = u(rng) * b.size.x, ly = u(rng) * b.size.y, lz = u(rng) * b.size.z;
  return b.center + b.axis_x() * lx + Vec3d{0, ly, 0} + b.axis_z() * lz;
}

/// Monte-Carlo overlap test: any of `n` points of a inside b, or of b inside a.
inline bool mc_overlap(const OrientedBox& a, const OrientedBox& b, int n, std::mt19937_64& rng) {
  for (int k = 0; k < n / 2; ++k)
    if (contains(b, sample_in(a, rng))) return true;
  for (int k = 0; k < n - n / 2; ++k)
    if (contains(a, sample_in(b, rng))) return true;
  return false;
}

/// Monte-Carlo IoU: sample the bounding region of both boxes.
inline double mc_iou(const OrientedBox& a, const OrientedBox& b, int n, std::mt19937_64& rng) {
  double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
  for (const auto* bx : {&a, &b}) {
    for (const auto& c : box_corners(*bx)) {
      const double v[3] = {c.x, c.y, c.z};
      for (int k = 0; k < 3; ++k) lo[k] = std::min(lo[k], v[k]), hi[k] = std::max(hi[k], v[k]);
    }
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long in_a = 0, in_b = 0, both = 0;
  for (int k = 0; k < n; ++k) {
    const Vec3d p{lo[0] + u(rng) * (hi[0] - lo[0]), lo[1] + u(rng) * (hi[1] - lo[1]),
                  lo[2] + u(rng) * (hi[2] - lo[2])};
    const bool ia = contains(a, p), ib = contains(b, p);
    in_a += ia;
    in_b += ib;
    both += ia && ib;
  }
  const long uni = in_a + in_b - both;
  return uni > 0 ? static_cast<double>(both) / static_cast<double>(uni) : 0.0;
}

/// Monte-Carlo IoU with jittered stratified points inside `a` (about n of
/// them): the fraction landing in `b` estimates the intersection volume.
inline double mc_iou_stratified(const OrientedBox& a, const OrientedBox& b, int n,
                                std::mt19937_64& rng) {
  const int k = std::max(1, static_cast<int>(std::cbrt(static_cast<double>(n))));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long inside = 0, total = 0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      for (int l = 0; l < k; ++l) {
        const double lx = ((i + u(rng)) / k - 0.5) * a.size.x;
        const double ly = ((j + u(rng)) / k - 0.5) * a.size.y;
        const double lz = ((l + u(rng)) / k - 0.5) * a.size.z;
        inside += contains(b, a.center + a.axis_x() * lx + Vec3d{0, ly, 0} + a.axis_z() * lz);
        ++total;
      }
  const double va = a.size.x * a.size.y * a.size.z, vb = b.size.x * b.size.y * b.size.z;
  const double inter = va * static_cast<double>(inside) / static_cast<double>(total);
  return inter / (va + vb - inter);
}

inline BFoV detection_of(const OrientedBox& box, int category = 0) {
  const auto t = project_box_to_tangent(box);
  BFoV d = bfov_of_tangent_box(*t, dir_to_lonlat(box.center));
  d.category = category;
  return d;
}

/// Object whose pose reproduces `box` and whose detection is its exact projection.
inline ObjectInstance object_at(int id, const OrientedBox& box, int category = 0) {
  const BFoV det = detection_of(box, category);
  return ObjectInstance(id, category, det, box_to_pose(box, det.center));
}

/// 8 x 8 room, floor at -1.6, ceiling at 1.4, camera in the middle.
inline LayoutShell big_room() { return rectangle_layout(-4, 4, -4, 4, -1.6, 1.4); }

inline Scene scene_of(const std::vector<OrientedBox>& boxes, LayoutShell layout = big_room()) {
  std::vector<ObjectInstance> objs;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    objs.push_back(object_at(static_cast<int>(i), boxes[i], static_cast<int>(i % 3)));
  return Scene(CameraFrame{}, std::move(layout), std::move(objs));
}

/// Energy configuration with every weight zero except `t`.
inline EnergyConfig only(Term t, double w = 1.0) {
  EnergyConfig c;
  for (std::size_t k = 0; k < kTermCount; ++k) c.weights[static_cast<Term>(k)] = 0.0;
  c.weights[t] = w;
  return c;
}

/// A random configuration for gradient checks, off every anchor and away from
/// every switch of the objective by more than `margin`.
struct GradCase {
  Scene scene;
  RelationSet relations;
};

inline std::optional<GradCase> smooth_case(std::uint64_t seed, const EnergyConfig& config,
                                           double margin = 1e-3) {
  GenConfig gen;
  gen.seed = seed;
  gen.min_objects = 2;
  gen.max_objects = 4;
  const auto g = generate_scene(gen);
  const Scene noisy = perturb_scene(g.scene, NoiseSpec{}, seed + 1, DetectionMode::Perturbed);
  std::mt19937_64 rng(seed + 2);
  std::uniform_real_distribution<double> mag(0.01, 0.05);
  std::bernoulli_distribution sign(0.5);
  auto poses = noisy.poses();
  for (auto& p : poses) {
    auto f = flatten(p);
    for (double& v : f) v += (sign(rng) ? 1.0 : -1.0) * mag(rng);
    p = unflatten(f);
    p.theta = wrap_angle(p.theta);
  }
  GradCase c{noisy.with_poses(poses), corrupt_relations(g.relations, 0.2, 1, seed + 3)};
  SwitchMonitor mon;
  {
    ScopedSwitchMonitor guard(mon);
    EnergyModel(c.scene, &c.relations, config).evaluate(c.scene.poses(), true);
  }
  if (!(mon.min_margin > margin)) return std::nullopt;
  return c;
}

/// max over parameters of |ad - fd| / max(|ad|, |fd|, 1e-3), with central differences.
inline double gradient_error(const GradCase& c, const EnergyConfig& config, double h = 1e-5) {
  const EnergyModel model(c.scene, &c.relations, config);
  const auto poses = c.scene.poses();
  const auto ad = model.evaluate(poses, true).gradient;
  double worst = 0.0;
  for (std::size_t k = 0; k < ad.size(); ++k) {
    auto plus = poses, minus = poses;
    auto fp = flatten(plus[k / kParamsPerObject]), fm = flatten(minus[k / kParamsPerObject]);
    fp[k % kParamsPerObject] += h;
    fm[k % kParamsPerObject] -= h;
    plus[k / kParamsPerObject] = unflatten(fp);
    minus[k / kParamsPerObject] = unflatten(fm);
    const double fd = (model.value(plus) - model.value(minus)) / (2 * h);
    const double scale = std::max({std::abs(ad[k]), std::abs(fd), 1e-3});
    worst = std::max(worst, std::abs(ad[k] - fd) / scale);
  }
  return worst;
}

}  // namespace relopt::testing
