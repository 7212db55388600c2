#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace relopt;
using namespace relopt::testing;

TEST(LonLat, AxisDirections) {
  auto s = dir_to_lonlat({0, 0, 1});
  EXPECT_EQ(s.lon, 0.0);
  EXPECT_EQ(s.lat, 0.0);
  s = dir_to_lonlat({1, 0, 0});
  EXPECT_DOUBLE_EQ(s.lon, kPi / 2);
  EXPECT_EQ(s.lat, 0.0);
  s = dir_to_lonlat({0, 1, 0});
  EXPECT_DOUBLE_EQ(s.lat, kPi / 2);
  EXPECT_EQ(s.lon, 0.0);
  EXPECT_THROW(dir_to_lonlat({0, 0, 0}), DataError);
}

TEST(LonLat, RoundTripRandomVectors) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  double worst = 0;
  for (int k = 0; k < 100000; ++k) {
    Vec3d v{g(rng), g(rng), g(rng)};
    v = v * (1.0 / norm(v));
    const Vec3d w = lonlat_to_dir(dir_to_lonlat(v));
    worst = std::max(worst, norm(w - v));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Tangent, CubeAheadExactHalfExtent) {
  const auto t = project_box_to_tangent(unit_cube({0, 0, 5}));
  ASSERT_TRUE(t);
  EXPECT_NEAR(t->u, 0, 1e-15);
  EXPECT_NEAR(t->v, 0, 1e-15);
  // the nearest face (depth 4.5) bounds the projection
  EXPECT_NEAR(t->hu, 1.0 / 9.0, 1e-15);
  EXPECT_NEAR(t->hv, 1.0 / 9.0, 1e-15);
  const BFoV b = bfov_of_tangent_box(*t, {0, 0});
  EXPECT_NEAR(b.hfov, 2 * std::atan(1.0 / 9.0), 1e-15);
  EXPECT_NEAR(0.5 * b.hfov, std::atan(0.5 / 5.0), 0.02);
}

TEST(Tangent, FollowsTheCenterDirection) {
  const auto a = project_box_to_tangent(unit_cube({0, 0, 5}));
  const double lon = kPi / 3;
  const auto b = project_box_to_tangent(unit_cube({5 * std::sin(lon), 0, 5 * std::cos(lon)}, lon));
  ASSERT_TRUE(a && b);
  EXPECT_NEAR(a->u, b->u, 1e-12);
  EXPECT_NEAR(a->hu, b->hu, 1e-12);
  EXPECT_NEAR(a->hv, b->hv, 1e-12);
}

TEST(Tangent, RotationInvariance) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ang(-kPi, kPi), pos(-3, 3), size(0.2, 1.5);
  for (int k = 0; k < 500; ++k) {
    OrientedBox b{{pos(rng), pos(rng) * 0.3, pos(rng)}, {size(rng), size(rng), size(rng)}, ang(rng)};
    if (norm(b.center) < 2.5) continue;
    const auto t0 = project_box_to_tangent(b);
    if (!t0) continue;
    const double phi = ang(rng);
    OrientedBox r = b;
    r.center = {std::cos(phi) * b.center.x + std::sin(phi) * b.center.z, b.center.y,
                -std::sin(phi) * b.center.x + std::cos(phi) * b.center.z};
    r.yaw = wrap_angle(b.yaw + phi);
    const auto t1 = project_box_to_tangent(r);
    ASSERT_TRUE(t1);
    EXPECT_NEAR(t0->u, t1->u, 1e-9);
    EXPECT_NEAR(t0->v, t1->v, 1e-9);
    EXPECT_NEAR(t0->hu, t1->hu, 1e-9);
    EXPECT_NEAR(t0->hv, t1->hv, 1e-9);
  }
}

TEST(Tangent, CornerBehindPlaneIsFlagged) {
  // a long flat slab next to the camera: far end lies more than 90 degrees off the center direction
  const OrientedBox slab{{0.3, 0, 1.0}, {0.2, 0.2, 4.0}, 0.0};
  EXPECT_FALSE(project_box_to_tangent(slab).has_value());
  EXPECT_TRUE(project_box_to_tangent(unit_cube({0, 0, 3})).has_value());
}

TEST(Bfov, ArctangentExtents) {
  EXPECT_EQ(bfov_of_tangent_box({0, 0, 0, 0}, {0, 0}).hfov, 0.0);
  const BFoV b = bfov_of_tangent_box({0, 0, std::tan(kPi / 6), std::tan(kPi / 6)}, {0.4, 0.1});
  EXPECT_NEAR(b.hfov, kPi / 3, 1e-15);
  EXPECT_NEAR(b.vfov, kPi / 3, 1e-15);
  EXPECT_NEAR(b.center.lon, 0.4, 1e-15);
}

TEST(Bfov, IouFixtures) {
  const BFoV a{{0, 0}, 0.4, 0.4, 1, 0};
  EXPECT_DOUBLE_EQ(bfov_iou(a, a), 1.0);
  BFoV far = a;
  far.center.lon = 2.0;
  EXPECT_EQ(bfov_iou(a, far), 0.0);
  BFoV half = a;
  half.center.lon = 0.2;
  EXPECT_NEAR(bfov_iou(a, half), 1.0 / 3.0, 1e-12);
  // overlap across the seam
  const BFoV r{{kPi - 0.1, 0}, 0.4, 0.4, 1, 0};
  const BFoV l{{-kPi + 0.1, 0}, 0.4, 0.4, 1, 0};
  EXPECT_NEAR(bfov_iou(r, l), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(bfov_iou(r, l), bfov_iou(l, r));
}

TEST(Merge, SeamFragmentsJoin) {
  const BFoV right{{kPi - 0.1, 0.05}, 0.2, 0.3, 0.9, 2};
  const BFoV left{{-kPi + 0.15, 0.05}, 0.3, 0.3, 0.8, 2};
  const auto out = extend_and_merge({right, left});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_NEAR(out[0].hfov, 0.5, 1e-12);
  EXPECT_NEAR(out[0].vfov, 0.3, 1e-12);
  // union spans [pi - 0.2, pi + 0.3]
  EXPECT_NEAR(wrap_angle(out[0].center.lon - (kPi + 0.05)), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(out[0].score, 0.9);
  EXPECT_EQ(out[0].category, 2);
  EXPECT_GE(out[0].center.lon, -kPi);
  EXPECT_LT(out[0].center.lon, kPi);
}

TEST(Merge, DisjointUnchangedAndDuplicatesSuppressed) {
  const BFoV a{{0, 0}, 0.3, 0.3, 0.7, 1};
  const BFoV b{{1.5, 0.2}, 0.3, 0.3, 0.6, 1};
  auto out = extend_and_merge({a, b});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], a);
  EXPECT_EQ(out[1], b);
  BFoV dup = a;
  dup.score = 0.95;
  out = extend_and_merge({a, dup});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].score, 0.95);
}

TEST(Merge, IdempotentOnRandomSets) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> lon(-kPi, kPi), lat(-0.6, 0.6), fov(0.05, 0.8), sc(0, 1);
  std::uniform_int_distribution<int> cat(0, 2);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<BFoV> d;
    for (int k = 0; k < 12; ++k) {
      BFoV b{{lon(rng), lat(rng)}, fov(rng), fov(rng), sc(rng), cat(rng)};
      if (k % 4 == 0) {
        // seam fragment pair
        b.center.lon = kPi - 0.5 * b.hfov;
        BFoV l = b;
        l.center.lon = -kPi + 0.5 * l.hfov;
        d.push_back(l);
      }
      d.push_back(b);
    }
    const auto once = extend_and_merge(d);
    EXPECT_EQ(extend_and_merge(once), once);
    for (std::size_t i = 0; i < once.size(); ++i)
      for (std::size_t j = i + 1; j < once.size(); ++j)
        if (once[i].category == once[j].category) EXPECT_LE(bfov_iou(once[i], once[j]), 0.5);
  }
}
