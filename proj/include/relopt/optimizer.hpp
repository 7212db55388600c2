#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "relopt/energy.hpp"
#include "relopt/error.hpp"
#include "relopt/scene.hpp"

namespace relopt {

/// Per-parameter-group step multipliers. Offsets and yaw are radians, distance
/// and size meters, yet all share one learning rate. The defaults are tuned for
/// learning rate 1 with the default weights; unit() scales diverge there.
struct GroupScales {
  double offset = 1e-4;
  double dist = 1e-3;
  double size = 3e-3;
  double theta = 3e-3;

  static GroupScales unit() { return {1.0, 1.0, 1.0, 1.0}; }

  friend bool operator==(const GroupScales&, const GroupScales&) = default;
};

enum class ResolvePolicy { Final, BestEnergy };

struct OptimConfig {
  double learning_rate = 1.0;
  int steps = 100;
  double momentum = 0.9;
  GroupScales scales;
  int trajectory_stride = 1;
  ResolvePolicy policy = ResolvePolicy::Final;
  /// Stop once the energy changed by less than plateau_delta over plateau_window steps.
  bool plateau_stop = false;
  double plateau_delta = 1e-6;
  int plateau_window = 10;

  void validate() const {
    require(learning_rate > 0.0, "optimizer: learning_rate must be > 0");
    require(steps >= 1, "optimizer: steps must be >= 1");
    require(momentum >= 0.0 && momentum < 1.0, "optimizer: momentum must be in [0, 1)");
    require(trajectory_stride >= 1, "optimizer: trajectory stride must be >= 1");
    require(scales.offset > 0 && scales.dist > 0 && scales.size > 0 && scales.theta > 0,
            "optimizer: group scales must be > 0");
  }
};

inline constexpr double kMinExtent = 1e-3;

struct TrajectoryFrame {
  int step = 0;
  double energy = 0.0;
  std::vector<PoseParams> poses;

  friend bool operator==(const TrajectoryFrame&, const TrajectoryFrame&) = default;
};

/// Snapshots of one run. `scene` is the input; frames[0] holds its poses.
struct Trajectory {
  Scene scene;
  std::vector<TrajectoryFrame> frames;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

inline Scene resolve_scene(const Trajectory& traj, ResolvePolicy policy) {
  require(!traj.frames.empty(), "resolve_scene: empty trajectory");
  if (policy == ResolvePolicy::Final) return traj.scene.with_poses(traj.frames.back().poses);
  auto best = std::min_element(traj.frames.begin(), traj.frames.end(),
                               [](const auto& a, const auto& b) { return a.energy < b.energy; });
  return traj.scene.with_poses(best->poses);
}

struct OptimResult {
  Scene scene;
  Trajectory trajectory;
};

namespace detail {

inline void check_finite(const EnergyReport& rep, int step) {
  for (std::size_t i = 0; i < rep.per_object.size(); ++i) {
    for (std::size_t t = 0; t < kTermCount; ++t) {
      if (!std::isfinite(rep.per_object[i][t])) {
        std::ostringstream msg;
        msg << "step " << step << ": term " << kTermNames[t] << " of object " << i
            << " is not finite";
        throw NumericalError(msg.str());
      }
    }
  }
  for (std::size_t k = 0; k < rep.gradient.size(); ++k) {
    if (!std::isfinite(rep.gradient[k])) {
      std::ostringstream msg;
      msg << "step " << step << ": gradient of " << param_name(k % kParamsPerObject)
          << " of object " << k / kParamsPerObject << " is not finite";
      throw NumericalError(msg.str());
    }
  }
  if (!std::isfinite(rep.total))
    throw NumericalError("step " + std::to_string(step) + ": total energy is not finite");
}

inline double group_scale(const GroupScales& s, std::size_t k) {
  switch (static_cast<PoseParam>(k)) {
    case PoseParam::DeltaLon:
    case PoseParam::DeltaLat: return s.offset;
    case PoseParam::Dist: return s.dist;
    case PoseParam::SizeX:
    case PoseParam::SizeY:
    case PoseParam::SizeZ: return s.size;
    case PoseParam::Theta: return s.theta;
  }
  return 1.0;
}

}  // namespace detail

/// Gradient descent with classical momentum over every object's pose.
/// Layout, detections, initial poses and relations stay fixed.
inline OptimResult optimize(const Scene& scene, const RelationSet& relations,
                            const EnergyConfig& energy, const OptimConfig& config) {
  config.validate();
  const EnergyModel model(scene, &relations, energy);
  const std::size_t n = scene.objects().size();
  std::vector<PoseParams> poses = scene.poses();
  std::vector<double> velocity(n * kParamsPerObject, 0.0);
  std::vector<double> history;
  Trajectory traj{scene, {}};

  int step = 0;
  for (; step < config.steps; ++step) {
    const EnergyReport rep = model.evaluate(poses, true);
    detail::check_finite(rep, step);
    if (step % config.trajectory_stride == 0) traj.frames.push_back({step, rep.total, poses});
    history.push_back(rep.total);
    if (config.plateau_stop && step >= config.plateau_window &&
        std::abs(history[step] - history[step - config.plateau_window]) < config.plateau_delta)
      break;

    for (std::size_t i = 0; i < n; ++i) {
      auto flat = flatten(poses[i]);
      for (std::size_t k = 0; k < kParamsPerObject; ++k) {
        double& v = velocity[i * kParamsPerObject + k];
        v = config.momentum * v -
            config.learning_rate * detail::group_scale(config.scales, k) *
                rep.gradient[i * kParamsPerObject + k];
        flat[k] += v;
      }
      PoseParams p = unflatten(flat);
      p.theta = wrap_angle(p.theta);
      p.dist = std::max(p.dist, kMinExtent);
      p.size = {std::max(p.size.x, kMinExtent), std::max(p.size.y, kMinExtent),
                std::max(p.size.z, kMinExtent)};
      poses[i] = p;
    }
  }
  if (traj.frames.empty() || traj.frames.back().step != step) {
    const EnergyReport rep = model.evaluate(poses, false);
    detail::check_finite(rep, step);
    traj.frames.push_back({step, rep.total, poses});
  }
  Scene out = resolve_scene(traj, config.policy);
  return {std::move(out), std::move(traj)};
}

}  // namespace relopt
