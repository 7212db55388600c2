#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "relopt/collision.hpp"
#include "relopt/error.hpp"
#include "relopt/scene.hpp"

namespace relopt {

/// Dense row-major matrix.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

/// Binary relation with the confidence that `value` is correct.
struct Label {
  bool value = false;
  double confidence = 1.0;

  /// Probability that the relation holds.
  double likelihood() const { return value ? confidence : 1.0 - confidence; }

  friend bool operator==(const Label&, const Label&) = default;
};

struct BinLabel {
  int bin = 0;
  double confidence = 1.0;

  friend bool operator==(const BinLabel&, const BinLabel&) = default;
};

inline constexpr int kRotationBins = 8;
inline constexpr double kBinWidth = kTwoPi / kRotationBins;

/// Relation labels over n objects and m walls. Columns 0..n-1 of the pairwise
/// grids are objects, columns n..n+m-1 are walls.
struct RelationSet {
  std::size_t num_objects = 0;
  std::size_t num_walls = 0;
  Grid<BinLabel> rot_bin;    // n x (n+m): bin of yaw_j - yaw_i
  Grid<Label> attach_obj;    // n x (n+m): contact within tolerance
  std::vector<Label> attach_floor;
  std::vector<Label> attach_ceiling;
  std::vector<double> in_room;
  Grid<Label> farther;       // n x n: center of i farther from the camera than j

  RelationSet() = default;
  RelationSet(std::size_t n, std::size_t m)
      : num_objects(n),
        num_walls(m),
        rot_bin(n, n + m),
        attach_obj(n, n + m),
        attach_floor(n),
        attach_ceiling(n),
        in_room(n, 1.0),
        farther(n, n) {}

  /// Throws unless the grids match a scene with n objects and m walls.
  void check_covers(std::size_t n, std::size_t m) const {
    require(num_objects == n && num_walls == m,
            "relations: cover " + std::to_string(num_objects) + " objects / " +
                std::to_string(num_walls) + " walls, scene has " + std::to_string(n) + " / " +
                std::to_string(m));
    require(rot_bin.rows() == n && rot_bin.cols() == n + m && attach_obj.rows() == n &&
                attach_obj.cols() == n + m && attach_floor.size() == n &&
                attach_ceiling.size() == n && in_room.size() == n && farther.rows() == n &&
                farther.cols() == n,
            "relations: missing entries");
  }

  friend bool operator==(const RelationSet&, const RelationSet&) = default;
};

/// Nearest of the 8 bins centred on multiples of 45 degrees; exact half-way
/// angles go to the upper bin.
inline int bin_angle(double angle) {
  double a = std::fmod(angle, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return static_cast<int>(std::floor(a / kBinWidth + 0.5)) % kRotationBins;
}

inline double bin_center(int bin) { return wrap_angle(bin * kBinWidth); }

inline int opposite_bin(int bin) { return (kRotationBins - bin) % kRotationBins; }

/// Ground-truth relations of the scene's current poses.
inline RelationSet extract_relations(const Scene& scene, double tolerance = 0.1) {
  require(tolerance >= 0.0, "extract_relations: tolerance must be >= 0");
  const auto boxes = scene.object_boxes();
  const auto& walls = scene.walls();
  const std::size_t n = boxes.size(), m = walls.size();
  const auto& layout = scene.layout();
  RelationSet r(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int b = bin_angle(boxes[j].yaw - boxes[i].yaw);
      r.rot_bin(i, j) = {b, 1.0};
      r.rot_bin(j, i) = {opposite_bin(b), 1.0};
      const bool touch = contact_test(boxes[i], boxes[j], tolerance);
      r.attach_obj(i, j) = r.attach_obj(j, i) = {touch, 1.0};
      const double di = norm(boxes[i].center), dj = norm(boxes[j].center);
      r.farther(i, j) = {di > dj, 1.0};
      r.farther(j, i) = {dj > di, 1.0};
    }
    for (std::size_t k = 0; k < m; ++k) {
      r.rot_bin(i, n + k) = {bin_angle(walls[k].yaw - boxes[i].yaw), 1.0};
      r.attach_obj(i, n + k) = {contact_test(boxes[i], walls[k], tolerance), 1.0};
    }
    r.attach_floor[i] = {std::abs(boxes[i].bottom() - layout.floor_y) <= tolerance, 1.0};
    r.attach_ceiling[i] = {std::abs(layout.ceiling_y - boxes[i].top()) <= tolerance, 1.0};
    bool inside = true;
    for (const auto& c : box_corners(boxes[i]))
      inside = inside && point_in_polygon({c.x, c.z}, layout.floor_polygon);
    r.in_room[i] = inside ? 1.0 : 0.0;
  }
  return r;
}

/// Copy of the scene whose objects carry the in-room likelihoods of `r`.
inline Scene apply_in_room(const Scene& scene, const RelationSet& r) {
  r.check_covers(scene.objects().size(), scene.walls().size());
  auto objects = scene.objects();
  for (std::size_t i = 0; i < objects.size(); ++i) objects[i].in_room_likelihood = r.in_room[i];
  return Scene(scene.camera(), scene.layout(), std::move(objects));
}

/// Simulated imperfect predictions: each binary relation flips with
/// `flip_prob` (symmetric pairs flip together), rotation bins shift uniformly
/// within +-angle_noise_bins, and every confidence becomes 1 - flip_prob.
inline RelationSet corrupt_relations(const RelationSet& r, double flip_prob, int angle_noise_bins,
                                     std::uint64_t seed) {
  require(flip_prob >= 0.0 && flip_prob <= 1.0, "corrupt_relations: flip_prob must be in [0, 1]");
  require(angle_noise_bins >= 0, "corrupt_relations: angle_noise_bins must be >= 0");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution flip(flip_prob);
  std::uniform_int_distribution<int> shift(-angle_noise_bins, angle_noise_bins);
  const double conf = 1.0 - flip_prob;
  const std::size_t n = r.num_objects, m = r.num_walls;
  RelationSet out = r;
  auto flipped = [&](Label l) {
    if (flip(rng)) l.value = !l.value;
    l.confidence = conf;
    return l;
  };
  auto shifted = [&](BinLabel b) {
    b.bin = ((b.bin + shift(rng)) % kRotationBins + kRotationBins) % kRotationBins;
    b.confidence = conf;
    return b;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      out.rot_bin(i, j) = shifted(r.rot_bin(i, j));
      out.rot_bin(j, i) = {opposite_bin(out.rot_bin(i, j).bin), conf};
      out.attach_obj(i, j) = out.attach_obj(j, i) = flipped(r.attach_obj(i, j));
      const bool tie = !r.farther(i, j).value && !r.farther(j, i).value;
      out.farther(i, j) = flipped(r.farther(i, j));
      out.farther(j, i) = {tie ? false : !out.farther(i, j).value, conf};
    }
    for (std::size_t k = 0; k < m; ++k) {
      out.rot_bin(i, n + k) = shifted(r.rot_bin(i, n + k));
      out.attach_obj(i, n + k) = flipped(r.attach_obj(i, n + k));
    }
    out.attach_floor[i] = flipped(r.attach_floor[i]);
    out.attach_ceiling[i] = flipped(r.attach_ceiling[i]);
    if (flip(rng)) out.in_room[i] = 1.0 - r.in_room[i];
  }
  return out;
}

/// Geometric input features of objects and object pairs.
struct GeomFeatures {
  struct Object {
    std::array<double, 8> floor_height;     // corner y - floor_y
    std::array<double, 8> ceiling_height;   // ceiling_y - corner y
    std::array<double, 8> polygon_distance; // signed, negative inside the room
  };
  struct Pair {
    double rotation = 0.0;                  // wrap(yaw_j - yaw_i)
    std::array<double, 5> separation{};     // gaps on y, i.x, i.z, j.x, j.z
  };
  std::vector<Object> objects;
  Grid<Pair> pairs;  // n x (n+m), walls after objects
};

inline GeomFeatures geometric_features(const Scene& scene) {
  const auto boxes = scene.object_boxes();
  const auto& walls = scene.walls();
  const auto& layout = scene.layout();
  const std::size_t n = boxes.size(), m = walls.size();
  GeomFeatures f;
  f.objects.resize(n);
  f.pairs = Grid<GeomFeatures::Pair>(n, n + m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto corners = box_corners(boxes[i]);
    for (int k = 0; k < 8; ++k) {
      f.objects[i].floor_height[k] = corners[k].y - layout.floor_y;
      f.objects[i].ceiling_height[k] = layout.ceiling_y - corners[k].y;
      f.objects[i].polygon_distance[k] =
          signed_polygon_distance({corners[k].x, corners[k].z}, layout.floor_polygon);
    }
    for (std::size_t j = 0; j < n + m; ++j) {
      if (j == i) continue;
      const OrientedBox& other = j < n ? boxes[j] : walls[j - n];
      auto& p = f.pairs(i, j);
      p.rotation = wrap_angle(other.yaw - boxes[i].yaw);
      const auto g = sat_gaps(boxes[i], other, AxisSet::AllFaceNormals);
      p.separation = {g.gaps[0], g.gaps[2], g.gaps[3], g.gaps[4], g.gaps[5]};
    }
  }
  return f;
}

}  // namespace relopt
