#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "mripp/errors.hpp"
#include "mripp/random.hpp"
#include "mripp/sensor.hpp"

using namespace mripp;

namespace {

// Segment/box slab test: does the open segment a->b (excluding its last
// 1e-9 fraction) pass through the closed voxel box?
bool segment_hits_box(const Vec3& a, const Vec3& b, const Vec3& lo, const Vec3& hi) {
  double t0 = 0.0;
  double t1 = 1.0 - 1e-9;
  const Vec3 d = b - a;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (a[k] < lo[k] || a[k] > hi[k]) return false;
      continue;
    }
    double ta = (lo[k] - a[k]) / d[k];
    double tb = (hi[k] - a[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

// Visibility by exhaustive search over every obstacle voxel.
std::vector<int> oracle_visible(const World& w, const Action& pose, double fov_deg, double range) {
  std::vector<int> out;
  const double t = std::tan(fov_deg * std::numbers::pi / 360.0);
  const double ang = pose.d();
  const Vec3 axis(std::cos(ang), std::sin(ang), 0.0);
  const Vec3 lateral(-axis.y(), axis.x(), 0.0);
  for (const Target& tg : w.targets) {
    const Vec3 v = tg.point - pose.position;
    if (v.norm() > range) continue;
    if ((-v).dot(tg.normal.cast<double>()) <= 0.0) continue;
    const double ax = v.dot(axis);
    if (ax <= 0.0 || std::abs(v.dot(lateral)) > t * ax || std::abs(v.z()) > t * ax) continue;
    bool blocked = false;
    for (std::size_t i = 0; i < w.occupied.size() && !blocked; ++i) {
      if (!w.occupied[i]) continue;
      const Voxel vox = w.shape.voxel(i);
      if (vox == tg.voxel) continue;
      const Vec3 lo = vox.cast<double>() * w.shape.voxel_size;
      const Vec3 hi = lo + Vec3::Constant(w.shape.voxel_size);
      blocked = segment_hits_box(pose.position, tg.point, lo, hi);
    }
    if (!blocked) out.push_back(tg.id);
  }
  return out;
}

OccupancyGrid grid_with_free(const World& w, const Vec3& p) {
  OccupancyGrid g(w.shape);
  g.observe(w.shape.voxel_of(p), VoxelState::Free);
  return g;
}

}  // namespace

TEST_CASE("sensing into empty space frees voxels and sees nothing") {
  const World w = fixtures::empty_world(20, 0.05);
  const Action pose{Vec3(0.52, 0.52, 0.52), ViewDirection::East};
  OccupancyGrid g = grid_with_free(w, pose.position);
  const auto before = g.unknown_count();
  const SensorObservation obs = sense(w, g, SensorModel{90.0, 0.24, 0}, pose);
  CHECK(obs.visible_targets.empty());
  CHECK(obs.occupied_voxels.empty());
  CHECK(obs.freed_voxels.size() > 50);
  CHECK(g.unknown_count() == before - obs.freed_voxels.size());
  for (auto i : obs.freed_voxels) CHECK(g.state(w.shape.voxel(i)) == VoxelState::Free);
}

TEST_CASE("a target behind an obstacle voxel on the same ray is hidden") {
  World w = fixtures::empty_world(20, 0.05);
  const Action pose{Vec3(0.125, 0.525, 0.525), ViewDirection::East};
  // Target on the west face of voxel x=8; voxel x=5 sits on the ray.
  fixtures::block(w, {8, 10, 10});
  const int id = fixtures::add_target(w, {8, 10, 10}, {-1, 0, 0});
  OccupancyGrid g1 = grid_with_free(w, pose.position);
  CHECK(sense(w, g1, SensorModel{90.0, 0.3, 0}, pose).visible_targets == std::vector<int>{id});
  fixtures::block(w, {5, 10, 10});
  OccupancyGrid g2 = grid_with_free(w, pose.position);
  const auto obs = sense(w, g2, SensorModel{90.0, 0.3, 0}, pose);
  CHECK(obs.visible_targets.empty());
  CHECK(std::count(obs.occupied_voxels.begin(), obs.occupied_voxels.end(), w.shape.index({5, 10, 10})) == 1);
}

TEST_CASE("targets facing away, out of range or outside the pyramid are not seen") {
  World w = fixtures::empty_world(20, 0.05);
  const Action pose{Vec3(0.125, 0.525, 0.525), ViewDirection::East};
  fixtures::block(w, {6, 10, 10});
  fixtures::add_target(w, {6, 10, 10}, {1, 0, 0});   // faces away
  fixtures::block(w, {12, 10, 10});
  fixtures::add_target(w, {12, 10, 10}, {-1, 0, 0}); // beyond range
  fixtures::block(w, {4, 16, 10});
  fixtures::add_target(w, {4, 16, 10}, {0, -1, 0}); // outside the 90 degree pyramid
  OccupancyGrid g = grid_with_free(w, pose.position);
  CHECK(sense(w, g, SensorModel{90.0, 0.24, 0}, pose).visible_targets.empty());
}

TEST_CASE("visible sets match an exhaustive line-of-sight oracle in random toy scenes") {
  Rng rng(3);
  int compared = 0;
  for (int scene = 0; scene < 60; ++scene) {
    World w = fixtures::empty_world(12, 1.0 / 12);
    for (int b = 0; b < 10; ++b)
      fixtures::block(w, {static_cast<int>(rng.below(12)), static_cast<int>(rng.below(12)),
                          static_cast<int>(rng.below(12))});
    static const Voxel sides[4] = {Voxel(1, 0, 0), Voxel(-1, 0, 0), Voxel(0, 1, 0), Voxel(0, -1, 0)};
    for (std::size_t i = 0; i < w.occupied.size(); ++i) {
      if (!w.occupied[i]) continue;
      for (const Voxel& n : sides) {
        const Voxel out = w.shape.voxel(i) + n;
        if (w.shape.contains(out) && !w.is_occupied(out)) fixtures::add_target(w, w.shape.voxel(i), n);
      }
    }
    Vec3 eye;
    do {
      eye = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
    } while (w.is_occupied(w.shape.voxel_of(eye)));
    const Action pose{eye, direction_from_index(static_cast<int>(rng.below(4)))};
    OccupancyGrid g = grid_with_free(w, eye);
    auto got = sense(w, g, SensorModel{90.0, 0.4, 0}, pose).visible_targets;
    auto want = oracle_visible(w, pose, 90.0, 0.4);
    std::sort(got.begin(), got.end());
    CHECK(got == want);
    compared += static_cast<int>(want.size());
  }
  CHECK(compared > 20);
}

TEST_CASE("every visible target lies within range and the view pyramid") {
  const World w = generate_world(fixtures::tiny_world(4));
  const SensorModel sensor = SensorModel::from_world(w.config);
  Rng rng(8);
  for (int k = 0; k < 30; ++k) {
    Vec3 p(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1));
    if (w.is_occupied(w.shape.voxel_of(p))) continue;
    const Action pose{p, direction_from_index(static_cast<int>(rng.below(4)))};
    OccupancyGrid g = grid_with_free(w, p);
    for (int id : sense(w, g, sensor, pose).visible_targets) {
      const Target& t = w.targets[static_cast<std::size_t>(id)];
      CHECK((t.point - p).norm() <= sensor.range + 1e-12);
      CHECK(sensor.in_frustum(pose, t.point));
      CHECK(line_of_sight(w, p, t));
    }
  }
}

TEST_CASE("sensing agrees with ground truth and is deterministic") {
  const World w = generate_world(fixtures::tiny_world(6));
  const SensorModel sensor = SensorModel::from_world(w.config);
  const Action pose{Vec3(0.02, 0.02, 0.3), ViewDirection::North};
  OccupancyGrid a = grid_with_free(w, pose.position);
  OccupancyGrid b = grid_with_free(w, pose.position);
  const auto oa = sense(w, a, sensor, pose);
  const auto ob = sense(w, b, sensor, pose);
  CHECK(oa.visible_targets == ob.visible_targets);
  CHECK(a.raw() == b.raw());
  for (std::size_t i = 0; i < a.raw().size(); ++i) {
    const auto s = static_cast<VoxelState>(a.raw()[i]);
    if (s == VoxelState::Free) CHECK(w.occupied[i] == 0);
    if (s == VoxelState::Occupied) CHECK(w.occupied[i] == 1);
  }
}

TEST_CASE("sensing from an unknown or occupied voxel is a precondition error") {
  World w = fixtures::empty_world(10, 0.1);
  OccupancyGrid g(w.shape);
  CHECK_THROWS_AS(sense(w, g, SensorModel{}, Action{Vec3(0.55, 0.55, 0.55), ViewDirection::East}), PreconditionError);
  fixtures::block(w, {5, 5, 5});
  g.observe({5, 5, 5}, VoxelState::Occupied);
  CHECK_THROWS_AS(sense(w, g, SensorModel{}, Action{Vec3(0.55, 0.55, 0.55), ViewDirection::East}), PreconditionError);
  CHECK_THROWS_AS(sense(w, g, SensorModel{}, Action{Vec3(1.5, 0.5, 0.5), ViewDirection::East}), PreconditionError);
}
