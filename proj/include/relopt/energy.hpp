#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "relopt/collision.hpp"
#include "relopt/dual.hpp"
#include "relopt/pano.hpp"
#include "relopt/relations.hpp"
#include "relopt/scene.hpp"

namespace relopt {

enum class Term : int {
  ObjectCollision = 0,  // oc
  WallCollision,        // wc
  FloorCollision,       // fc
  CeilingCollision,     // cc
  RelativeRotation,     // rr
  ObjectAttachment,     // oa
  FloorAttachment,      // fa
  CeilingAttachment,    // ca
  RelativeDistance,     // rd
  Projection,           // bp
  Offset,               // delta
  Distance,             // dist
  Size,                 // size
  Orientation,          // theta
};

inline constexpr std::size_t kTermCount = 14;

inline constexpr std::array<std::string_view, kTermCount> kTermNames = {
    "oc", "wc", "fc", "cc", "rr", "oa", "fa", "ca", "rd", "bp", "delta", "dist", "size", "theta"};

enum class TermGroup { Collision, Relation, Observation };

constexpr TermGroup group_of(Term t) {
  const int k = static_cast<int>(t);
  if (k <= 3) return TermGroup::Collision;
  if (k <= 8) return TermGroup::Relation;
  return TermGroup::Observation;
}

constexpr std::size_t index_of(Term t) { return static_cast<std::size_t>(t); }

/// Multiplier of every energy term.
struct TermWeights {
  double oc = 1.0, wc = 1.0, fc = 1.0, cc = 1.0;
  double rr = 0.1, oa = 1.0, fa = 1.0, ca = 1.0, rd = 0.01;
  double delta = 0.0001, dist = 0.01, size = 1.0, theta = 0.001, bp = 10.0;

  double operator[](Term t) const { return field<const double>(*this, t); }
  double& operator[](Term t) { return field<double>(*this, t); }

  friend bool operator==(const TermWeights&, const TermWeights&) = default;

 private:
  template <class D, class Self>
  static D& field(Self& w, Term t) {
    switch (t) {
      case Term::ObjectCollision: return w.oc;
      case Term::WallCollision: return w.wc;
      case Term::FloorCollision: return w.fc;
      case Term::CeilingCollision: return w.cc;
      case Term::RelativeRotation: return w.rr;
      case Term::ObjectAttachment: return w.oa;
      case Term::FloorAttachment: return w.fa;
      case Term::CeilingAttachment: return w.ca;
      case Term::RelativeDistance: return w.rd;
      case Term::Projection: return w.bp;
      case Term::Offset: return w.delta;
      case Term::Distance: return w.dist;
      case Term::Size: return w.size;
      case Term::Orientation: return w.theta;
    }
    return w.theta;
  }
};

/// Weights used on the synthetic iGibson-style scenes.
inline TermWeights igibson_weights() { return {}; }

/// Weights auto-searched for Structured3D. Relation weights and the offset
/// weight keep their iGibson values.
inline TermWeights structured3d_weights() {
  TermWeights w;
  w.oc = 0.0157;
  w.wc = 0.2625;
  w.fc = 0.3182;
  w.cc = 0.2036;
  w.rd = 0.0040;
  w.dist = 0.1404;
  w.size = 6.0502;
  w.theta = 0.0003;
  w.bp = 0.2895;
  return w;
}

/// Learning rate that accompanies the Structured3D weights.
inline constexpr double kStructured3dLearningRate = 0.0124;

inline std::optional<TermWeights> weights_preset(std::string_view name) {
  if (name == "igibson") return igibson_weights();
  if (name == "structured3d") return structured3d_weights();
  return std::nullopt;
}

struct EnergyConfig {
  TermWeights weights;
  AxisSet axes = AxisSet::Deduplicated;
  /// Sum object pairs over ordered (i, j) as written, i.e. twice.
  bool count_pairs_twice = false;
  /// Attachment gaps up to this size count as contact.
  double contact_epsilon = 1e-6;
};

struct EnergyReport {
  double total = 0.0;
  double collision = 0.0;
  double relation = 0.0;
  double observation = 0.0;
  std::array<double, kTermCount> terms{};
  /// Weighted terms per object; a pair term is split evenly between its objects.
  std::vector<std::array<double, kTermCount>> per_object;
  /// d total / d params, 7 entries per object in PoseParam order. Empty when
  /// only values were requested.
  std::vector<double> gradient;
};

/// The full objective for one scene, with layout, detections, initial poses
/// and relations frozen. Evaluates at arbitrary object poses.
class EnergyModel {
 public:
  EnergyModel(const Scene& scene, const RelationSet* relations, EnergyConfig config)
      : scene_(scene), relations_(relations), config_(config) {
    if (relations_) relations_->check_covers(scene_.objects().size(), scene_.walls().size());
  }

  const EnergyConfig& config() const { return config_; }
  std::size_t num_objects() const { return scene_.objects().size(); }

  EnergyReport evaluate(std::span<const PoseParams> poses, bool with_gradient = true) const {
    const std::size_t n = num_objects();
    const std::size_t m = scene_.walls().size();
    require(poses.size() == n, "energy: pose count mismatch");
    EnergyReport rep;
    rep.per_object.assign(n, {});
    if (with_gradient) rep.gradient.assign(n * kParamsPerObject, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
      if (with_gradient) {
        const auto t = object_terms(i, seeded<7>(poses[i], 0));
        accumulate(rep, t, i, i, 0.5, 0.5);
      } else {
        accumulate(rep, object_terms(i, poses[i]), i, i, 0.5, 0.5);
      }
      for (std::size_t k = 0; k < m; ++k) {
        if (with_gradient) {
          accumulate(rep, wall_terms(i, k, seeded<7>(poses[i], 0)), i, i, 0.5, 0.5);
        } else {
          accumulate(rep, wall_terms(i, k, poses[i]), i, i, 0.5, 0.5);
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (with_gradient) {
          const auto t = pair_terms(i, j, seeded<14>(poses[i], 0), seeded<14>(poses[j], 7));
          accumulate(rep, t, i, j, 0.5, 0.5);
        } else {
          accumulate(rep, pair_terms(i, j, poses[i], poses[j]), i, j, 0.5, 0.5);
        }
      }
    }
    for (std::size_t t = 0; t < kTermCount; ++t) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += rep.per_object[i][t];
      rep.terms[t] = sum;
      switch (group_of(static_cast<Term>(t))) {
        case TermGroup::Collision: rep.collision += sum; break;
        case TermGroup::Relation: rep.relation += sum; break;
        case TermGroup::Observation: rep.observation += sum; break;
      }
    }
    rep.total = rep.collision + rep.relation + rep.observation;
    return rep;
  }

  double value(std::span<const PoseParams> poses) const { return evaluate(poses, false).total; }

 private:
  template <class T>
  using Terms = std::array<T, kTermCount>;

  template <int N>
  static BasicPose<Dual<N>> seeded(const PoseParams& p, int offset) {
    using D = Dual<N>;
    return {D::variable(p.delta_lon, offset + 0),
            D::variable(p.delta_lat, offset + 1),
            D::variable(p.dist, offset + 2),
            {D::variable(p.size.x, offset + 3), D::variable(p.size.y, offset + 4),
             D::variable(p.size.z, offset + 5)},
            D::variable(p.theta, offset + 6)};
  }

  template <class T>
  T contact_dead_zone(const T& gap) const {
    note_switch(value_of(gap) - config_.contact_epsilon);
    return value_of(gap) > config_.contact_epsilon ? gap : T(0.0);
  }

  bool active(Term t) const { return config_.weights[t] != 0.0; }

  template <class T>
  Terms<T> object_terms(std::size_t i, const BasicPose<T>& p) const {
    using std::sqrt;
    Terms<T> e;
    e.fill(T(0.0));
    const ObjectInstance& obj = scene_.objects()[i];
    const LayoutShell& layout = scene_.layout();
    const BasicBox<T> box = pose_to_box(p, obj.detection.center);

    if (active(Term::WallCollision))
      e[index_of(Term::WallCollision)] = wall_collision(box, layout) * obj.in_room_likelihood;
    const auto [fc, cc] = floor_ceiling_collision(box, layout);
    e[index_of(Term::FloorCollision)] = fc;
    e[index_of(Term::CeilingCollision)] = cc;

    if (relations_) {
      const double lf = relations_->attach_floor[i].likelihood();
      const double lc = relations_->attach_ceiling[i].likelihood();
      if (lf != 0.0)
        e[index_of(Term::FloorAttachment)] =
            contact_dead_zone(abs_val(box.bottom() - layout.floor_y)) * lf;
      if (lc != 0.0)
        e[index_of(Term::CeilingAttachment)] =
            contact_dead_zone(abs_val(layout.ceiling_y - box.top())) * lc;
    }

    if (active(Term::Projection)) {
      T bp(1.0);
      if (const auto t = project_box_to_tangent(box)) {
        const T horiz = sqrt(box.center.x * box.center.x + box.center.z * box.center.z);
        using std::atan2;
        const auto rect =
            angular_rect_of_tangent_box(*t, atan2(box.center.x, box.center.z),
                                        atan2(box.center.y, horiz));
        const AngularRect<T> det{T(obj.detection.center.lon), T(obj.detection.center.lat),
                                 T(obj.detection.hfov), T(obj.detection.vfov)};
        bp = positive_part(1.0 - angular_rect_iou(rect, det));
      }
      e[index_of(Term::Projection)] = bp;
    }

    const PoseParams& p0 = obj.initial_pose();
    e[index_of(Term::Offset)] = abs_val(p.delta_lon - p0.delta_lon) + abs_val(p.delta_lat - p0.delta_lat);
    e[index_of(Term::Distance)] = abs_val(p.dist - p0.dist);
    e[index_of(Term::Size)] = abs_val(p.size.x - p0.size.x) + abs_val(p.size.y - p0.size.y) +
                              abs_val(p.size.z - p0.size.z);
    e[index_of(Term::Orientation)] = angle_abs_error(p.theta - p0.theta);
    return e;
  }

  template <class T>
  Terms<T> wall_terms(std::size_t i, std::size_t k, const BasicPose<T>& p) const {
    Terms<T> e;
    e.fill(T(0.0));
    if (!relations_) return e;
    const std::size_t col = num_objects() + k;
    const ObjectInstance& obj = scene_.objects()[i];
    const OrientedBox& w = scene_.walls()[k];
    const BasicBox<T> box = pose_to_box(p, obj.detection.center);

    const BinLabel& rb = relations_->rot_bin(i, col);
    if (active(Term::RelativeRotation) && rb.confidence != 0.0)
      e[index_of(Term::RelativeRotation)] =
          angle_abs_error(w.yaw - box.yaw - bin_center(rb.bin)) * rb.confidence;

    const double la = relations_->attach_obj(i, col).likelihood();
    if (active(Term::ObjectAttachment) && la != 0.0) {
      const BasicBox<T> wall{{T(w.center.x), T(w.center.y), T(w.center.z)},
                             {T(w.size.x), T(w.size.y), T(w.size.z)},
                             T(w.yaw)};
      e[index_of(Term::ObjectAttachment)] =
          contact_dead_zone(separation_energy(sat_gaps(box, wall, config_.axes))) * la;
    }
    return e;
  }

  template <class T>
  Terms<T> pair_terms(std::size_t i, std::size_t j, const BasicPose<T>& pi,
                      const BasicPose<T>& pj) const {
    Terms<T> e;
    e.fill(T(0.0));
    const auto& objs = scene_.objects();
    const BasicBox<T> a = pose_to_box(pi, objs[i].detection.center);
    const BasicBox<T> b = pose_to_box(pj, objs[j].detection.center);
    const double multiplicity = config_.count_pairs_twice ? 2.0 : 1.0;

    const bool need_sat =
        active(Term::ObjectCollision) ||
        (relations_ && active(Term::ObjectAttachment) &&
         relations_->attach_obj(i, j).likelihood() + relations_->attach_obj(j, i).likelihood() != 0.0);
    if (need_sat) {
      const auto gaps = sat_gaps(a, b, config_.axes);
      e[index_of(Term::ObjectCollision)] = collision_energy(gaps) * multiplicity;
      if (relations_) {
        const double la = 0.5 * (relations_->attach_obj(i, j).likelihood() +
                                 relations_->attach_obj(j, i).likelihood());
        if (la != 0.0)
          e[index_of(Term::ObjectAttachment)] =
              contact_dead_zone(separation_energy(gaps)) * (la * multiplicity);
      }
    }
    if (!relations_) return e;

    // Ordered terms: (i, j) and (j, i) each use their own label; the unordered
    // sum averages them.
    const double half = config_.count_pairs_twice ? 1.0 : 0.5;
    if (active(Term::RelativeRotation)) {
      const BinLabel& bij = relations_->rot_bin(i, j);
      const BinLabel& bji = relations_->rot_bin(j, i);
      T rr(0.0);
      if (bij.confidence != 0.0)
        rr += angle_abs_error(b.yaw - a.yaw - bin_center(bij.bin)) * bij.confidence;
      if (bji.confidence != 0.0)
        rr += angle_abs_error(a.yaw - b.yaw - bin_center(bji.bin)) * bji.confidence;
      e[index_of(Term::RelativeRotation)] = rr * half;
    }
    if (active(Term::RelativeDistance)) {
      const T di = pi.dist, dj = pj.dist;
      const double lij = relations_->farther(i, j).likelihood();
      const double lji = relations_->farther(j, i).likelihood();
      // label "i farther" is violated by dj - di > 0, label "i not farther" by di - dj > 0
      const T closer = positive_part(dj - di);
      const T further = positive_part(di - dj);
      const T rd = (closer * lij + further * (1.0 - lij)) + (further * lji + closer * (1.0 - lji));
      e[index_of(Term::RelativeDistance)] = rd * half;
    }
    return e;
  }

  template <class T>
  void accumulate(EnergyReport& rep, const Terms<T>& e, std::size_t i, std::size_t j,
                  double share_i, double share_j) const {
    for (std::size_t t = 0; t < kTermCount; ++t) {
      const double w = config_.weights[static_cast<Term>(t)];
      if (w == 0.0) continue;
      const double v = w * value_of(e[t]);
      if (i == j) {
        rep.per_object[i][t] += v;
      } else {
        rep.per_object[i][t] += share_i * v;
        rep.per_object[j][t] += share_j * v;
      }
      if constexpr (!std::is_same_v<T, double>) {
        const std::size_t nd = e[t].d.size();
        for (std::size_t k = 0; k < nd; ++k) {
          const std::size_t obj = k < kParamsPerObject ? i : j;
          rep.gradient[obj * kParamsPerObject + k % kParamsPerObject] += w * e[t].d[k];
        }
      }
    }
  }

  Scene scene_;
  const RelationSet* relations_;
  EnergyConfig config_;
};

// ---------------------------------------------------------------------------
// Convenience entry points at the scene's current poses.

inline EnergyReport total_energy(const Scene& scene, const RelationSet& relations,
                                 const EnergyConfig& config = {}) {
  return EnergyModel(scene, &relations, config).evaluate(scene.poses(), true);
}

inline std::vector<double> gradient(const Scene& scene, const RelationSet& relations,
                                    const EnergyConfig& config = {}) {
  return total_energy(scene, relations, config).gradient;
}

/// E^c; needs no relations.
inline double collision_energy(const Scene& scene, const EnergyConfig& config = {}) {
  return EnergyModel(scene, nullptr, config).evaluate(scene.poses(), false).collision;
}

inline double relation_energy(const Scene& scene, const RelationSet& relations,
                              const EnergyConfig& config = {}) {
  return EnergyModel(scene, &relations, config).evaluate(scene.poses(), false).relation;
}

inline double observation_energy(const Scene& scene, const EnergyConfig& config = {}) {
  return EnergyModel(scene, nullptr, config).evaluate(scene.poses(), false).observation;
}

}  // namespace relopt
