#include <gtest/gtest.h>

#include "support.hpp"

using namespace relopt;
using namespace relopt::testing;

namespace {

RelationSet no_relations(const Scene& s) {
  RelationSet r(s.objects().size(), s.walls().size());
  for (std::size_t i = 0; i < r.num_objects; ++i) {
    r.attach_floor[i] = {false, 1.0};
    r.attach_ceiling[i] = {false, 1.0};
    for (std::size_t j = 0; j < r.num_objects + r.num_walls; ++j) r.rot_bin(i, j).confidence = 0.0;
  }
  return r;
}

GeneratedScene generated(std::uint64_t seed) {
  GenConfig cfg;
  cfg.seed = seed;
  return generate_scene(cfg);
}

}  // namespace

TEST(Weights, Presets) {
  const auto b = igibson_weights();
  EXPECT_EQ(b.oc, 1.0);
  EXPECT_EQ(b.rr, 0.1);
  EXPECT_EQ(b.rd, 0.01);
  EXPECT_EQ(b.delta, 0.0001);
  EXPECT_EQ(b.dist, 0.01);
  EXPECT_EQ(b.theta, 0.001);
  EXPECT_EQ(b.bp, 10.0);
  EXPECT_TRUE(weights_preset("structured3d").has_value());
  EXPECT_FALSE(weights_preset("nope").has_value());
  TermWeights w;
  w[Term::Projection] = 3.0;
  EXPECT_EQ(w.bp, 3.0);
  EXPECT_EQ(w[Term::Orientation], 0.001);
}

TEST(CollisionEnergy, Fixtures) {
  EXPECT_EQ(collision_energy(generated(1).scene), 0.0);
  const auto sunk = scene_of({make_box({0, -1.6 - 0.3 + 0.5, 3}, {1, 1, 1})});
  EXPECT_NEAR(collision_energy(sunk, only(Term::FloorCollision)), 0.3, 1e-12);
  const auto pair = scene_of({make_box({0, -1.1, 3}, {1, 1, 1}), make_box({0.5, -1.1, 3}, {1, 1, 1})});
  EXPECT_NEAR(collision_energy(pair, only(Term::ObjectCollision)), 2.5, 1e-12);
  EnergyConfig twice = only(Term::ObjectCollision);
  twice.count_pairs_twice = true;
  EXPECT_NEAR(collision_energy(pair, twice), 5.0, 1e-12);
}

TEST(CollisionEnergy, WallTermScaledByInRoomLikelihood) {
  const auto s = scene_of({make_box({3.7, -1.1, 0}, {1, 1, 1})});
  const double full = collision_energy(s, only(Term::WallCollision));
  EXPECT_NEAR(full, 0.8, 1e-12);
  RelationSet r = extract_relations(s);
  r.in_room[0] = 0.25;
  EXPECT_NEAR(collision_energy(apply_in_room(s, r), only(Term::WallCollision)), 0.2, 1e-12);
}

TEST(RelationEnergy, FloorAttachmentLifted) {
  const auto s = scene_of({make_box({0, -1.6 + 0.2 + 0.5, 3}, {1, 1, 1})});
  auto r = no_relations(s);
  r.attach_floor[0] = {true, 1.0};
  EXPECT_NEAR(relation_energy(s, r, only(Term::FloorAttachment)), 0.2, 1e-12);
  r.attach_floor[0] = {true, 0.5};
  EXPECT_NEAR(relation_energy(s, r, only(Term::FloorAttachment)), 0.1, 1e-12);
  r.attach_floor[0] = {false, 1.0};
  EXPECT_EQ(relation_energy(s, r, only(Term::FloorAttachment)), 0.0);
}

TEST(RelationEnergy, ObjectAttachmentGap) {
  const auto s = scene_of({make_box({-0.55, -1.1, 3}, {1, 1, 1}), make_box({0.55, -1.1, 3}, {1, 1, 1})});
  auto r = no_relations(s);
  r.attach_obj(0, 1) = r.attach_obj(1, 0) = {true, 1.0};
  EXPECT_NEAR(relation_energy(s, r, only(Term::ObjectAttachment)), 0.1, 1e-12);
  const auto hit = scene_of({make_box({-0.4, -1.1, 3}, {1, 1, 1}), make_box({0.4, -1.1, 3}, {1, 1, 1})});
  EXPECT_EQ(relation_energy(hit, r, only(Term::ObjectAttachment)), 0.0);
}

TEST(RelationEnergy, RotationAndDistanceOrder) {
  const auto s = scene_of({make_box({-1, -1.1, 3}, {1, 1, 1}, 0.1), make_box({1, -1.1, 5}, {1, 1, 1})});
  auto r = no_relations(s);
  r.rot_bin(0, 1) = {0, 1.0};
  r.rot_bin(1, 0) = {0, 1.0};
  EXPECT_NEAR(relation_energy(s, r, only(Term::RelativeRotation)), 0.1, 1e-12);
  // object 1 is farther; claim the opposite
  const double d0 = s.objects()[0].pose.dist, d1 = s.objects()[1].pose.dist;
  r.farther(0, 1) = {true, 1.0};
  r.farther(1, 0) = {false, 1.0};
  EXPECT_NEAR(relation_energy(s, r, only(Term::RelativeDistance)), d1 - d0, 1e-12);
  r.farther(0, 1) = {false, 1.0};
  r.farther(1, 0) = {true, 1.0};
  EXPECT_EQ(relation_energy(s, r, only(Term::RelativeDistance)), 0.0);
}

TEST(RelationEnergy, MissingEntriesRejected) {
  const auto s = scene_of({unit_cube({0, -1.1, 3})});
  EXPECT_THROW(relation_energy(s, RelationSet(2, 4)), DataError);
}

TEST(ObservationEnergy, Fixtures) {
  const auto box = make_box({0.5, -1.1, 3}, {1, 1, 1}, 0.3);
  const auto at = object_at(0, box);
  EXPECT_NEAR(observation_energy(scene_of({box})), 0.0, 1e-9);

  PoseParams moved = at.pose;
  moved.dist += 0.5;
  const Scene s(CameraFrame{}, big_room(), {ObjectInstance(0, 0, at.detection, moved, at.pose, 1.0)});
  EnergyConfig cfg;
  cfg.weights.bp = 0.0;
  EXPECT_NEAR(observation_energy(s, cfg), 0.005, 1e-12);

  BFoV far = at.detection;
  far.center.lon = wrap_angle(far.center.lon + kPi);
  PoseParams p = box_to_pose(box, far.center);
  const Scene d(CameraFrame{}, big_room(), {ObjectInstance(0, 0, far, p)});
  EXPECT_NEAR(observation_energy(d, only(Term::Projection, 10.0)), 10.0, 1e-12);
}

TEST(Gradient, DistanceL1Sign) {
  const auto at = object_at(0, make_box({0.5, -1.1, 3}, {1, 1, 1}));
  for (double step : {0.3, -0.3}) {
    PoseParams p = at.pose;
    p.dist += step;
    const Scene s(CameraFrame{}, big_room(), {ObjectInstance(0, 0, at.detection, p, at.pose, 1.0)});
    const auto g = gradient(s, no_relations(s), only(Term::Distance, 0.01));
    ASSERT_EQ(g.size(), 7u);
    EXPECT_DOUBLE_EQ(g[2], step > 0 ? 0.01 : -0.01);
    for (std::size_t k = 0; k < 7; ++k)
      if (k != 2) EXPECT_EQ(g[k], 0.0);
  }
}

TEST(Gradient, MatchesCentralDifferences) {
  const EnergyConfig cfg;
  int checked = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; checked < 40 && seed < 4000; seed += 4) {
    const auto c = smooth_case(9000 + seed, cfg);
    if (!c) continue;
    ++checked;
    worst = std::max(worst, gradient_error(*c, cfg));
  }
  EXPECT_EQ(checked, 40);
  EXPECT_LT(worst, 1e-4);
}

TEST(Report, SumsNonNegativityAndLinearity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = generated(300 + seed);
    const Scene s = perturb_scene(g.scene, NoiseSpec{}, seed);
    const auto rel = corrupt_relations(g.relations, 0.2, 1, seed);
    const EnergyConfig cfg;
    const auto rep = total_energy(s, rel, cfg);
    EXPECT_EQ(rep.gradient.size(), 7 * s.objects().size());
    double sum = 0.0;
    for (std::size_t t = 0; t < kTermCount; ++t) {
      EXPECT_GE(rep.terms[t], 0.0);
      sum += rep.terms[t];
      double per = 0.0;
      for (const auto& o : rep.per_object) per += o[t];
      EXPECT_NEAR(per, rep.terms[t], 1e-9);
    }
    EXPECT_NEAR(sum, rep.total, 1e-9);
    EXPECT_NEAR(rep.collision + rep.relation + rep.observation, rep.total, 1e-9);
    for (double v : rep.gradient) EXPECT_TRUE(std::isfinite(v));
    for (std::size_t t = 0; t < kTermCount; ++t) {
      EnergyConfig dbl = cfg;
      dbl.weights[static_cast<Term>(t)] *= 2.0;
      const auto rep2 = total_energy(s, rel, dbl);
      EXPECT_DOUBLE_EQ(rep2.terms[t], 2.0 * rep.terms[t]) << kTermNames[t];
    }
  }
}

TEST(Report, GroundTruthFixpoint) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = generated(500 + seed);
    const auto rep = total_energy(g.scene, g.relations);
    EXPECT_EQ(rep.collision, 0.0);
    EXPECT_EQ(rep.terms[index_of(Term::ObjectAttachment)], 0.0);
    EXPECT_EQ(rep.terms[index_of(Term::FloorAttachment)], 0.0);
    EXPECT_EQ(rep.terms[index_of(Term::CeilingAttachment)], 0.0);
    EXPECT_EQ(rep.terms[index_of(Term::RelativeDistance)], 0.0);
    EXPECT_EQ(rep.terms[index_of(Term::Offset)], 0.0);
    EXPECT_EQ(rep.terms[index_of(Term::Size)], 0.0);
    EXPECT_LE(rep.terms[index_of(Term::Projection)], 1e-9);
    // each ordered pair contributes at most half a bin of residual, weighted by 0.1
    const std::size_t n = g.scene.objects().size(), m = g.scene.walls().size();
    EXPECT_LE(rep.terms[index_of(Term::RelativeRotation)],
              0.1 * (n * (n - 1) / 2.0 + n * m) * kPi / 8 + 1e-12);
  }
}

TEST(Report, NoRelationsMeansNoRelationEnergy) {
  const auto g = generated(8);
  const auto s = perturb_scene(g.scene, NoiseSpec{}, 8);
  EXPECT_EQ(EnergyModel(s, nullptr, {}).evaluate(s.poses(), false).relation, 0.0);
}
