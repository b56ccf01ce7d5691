#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "mripp/errors.hpp"
#include "mripp/world.hpp"

using namespace mripp;

TEST_CASE("regular grid world has a window count inside the configured range") {
  WorldConfig c;
  c.seed = 7;
  c.placement = BuildingPlacement::RegularGrid;
  const World w = generate_world(c);
  CHECK(w.targets.size() >= 200);
  CHECK(w.targets.size() <= 250);
  CHECK(w.obstacle_count() > 0);
}

TEST_CASE("zero buildings give an empty world") {
  WorldConfig c;
  c.building_count = 0;
  const World w = generate_world(c);
  CHECK(w.obstacle_count() == 0);
  CHECK(w.targets.empty());
}

TEST_CASE("same config generates bit-identical worlds") {
  for (auto placement : {BuildingPlacement::RegularGrid, BuildingPlacement::Random}) {
    WorldConfig c = fixtures::tiny_world(99);
    c.placement = placement;
    const World a = generate_world(c);
    const World b = generate_world(c);
    CHECK(a.occupied == b.occupied);
    CHECK(world_to_json(a).dump() == world_to_json(b).dump());
  }
}

TEST_CASE("different seeds change random placement") {
  WorldConfig c = fixtures::tiny_world(1);
  c.placement = BuildingPlacement::Random;
  const World a = generate_world(c);
  c.seed = 2;
  const World b = generate_world(c);
  CHECK(a.occupied != b.occupied);
}

TEST_CASE("every target sits on an exposed face of an obstacle voxel") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (auto placement : {BuildingPlacement::RegularGrid, BuildingPlacement::Random}) {
      WorldConfig c = fixtures::tiny_world(seed);
      c.placement = placement;
      const World w = generate_world(c);
      std::set<std::pair<std::size_t, int>> faces;
      for (const Target& t : w.targets) {
        REQUIRE(w.shape.contains(t.voxel));
        CHECK(w.is_occupied(t.voxel));
        CHECK(t.normal.cwiseAbs().sum() == 1);
        CHECK(t.normal.z() == 0);
        const Voxel out = t.voxel + t.normal;
        if (w.shape.contains(out)) CHECK_FALSE(w.is_occupied(out));
        const Vec3 expected = w.shape.center(t.voxel) + 0.5 * w.shape.voxel_size * t.normal.cast<double>();
        CHECK((t.point - expected).norm() < 1e-12);
        const int face = t.normal.x() * 3 + t.normal.y();
        CHECK(faces.insert({w.shape.index(t.voxel), face}).second);
      }
    }
  }
}

TEST_CASE("start clearance keeps the origin column free") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    WorldConfig c = fixtures::tiny_world(seed);
    c.placement = BuildingPlacement::Random;
    const World w = generate_world(c);
    CHECK_FALSE(w.is_occupied(w.shape.voxel_of(Vec3::Zero())));
  }
}

TEST_CASE("world scale enlarges the ground area but keeps the voxel edge") {
  WorldConfig c = fixtures::tiny_world(3);
  const World base = generate_world(c);
  c.world_scale = 3.0;
  c.placement = BuildingPlacement::Random;
  const World big = generate_world(c);
  CHECK(big.shape.voxel_size == doctest::Approx(base.shape.voxel_size));
  CHECK(big.shape.nz == base.shape.nz);
  CHECK(big.shape.nx > base.shape.nx);
  CHECK(big.targets.size() >= static_cast<std::size_t>(3 * c.window_min));
  CHECK(big.targets.size() <= static_cast<std::size_t>(3 * c.window_max));
}

TEST_CASE("invalid configs are rejected") {
  WorldConfig c;
  c.sensor_range = 0.0;
  CHECK_THROWS_AS(generate_world(c), PreconditionError);
  c = WorldConfig{};
  c.sensor_fov_deg = 180.0;
  CHECK_THROWS_AS(generate_world(c), PreconditionError);
  c = WorldConfig{};
  c.window_min = 10;
  c.window_max = 5;
  CHECK_THROWS_AS(generate_world(c), PreconditionError);
  c = WorldConfig{};
  c.window_min = 0;
  CHECK_THROWS_AS(generate_world(c), PreconditionError);
}

TEST_CASE("impossible placements raise a generation error naming the constraint") {
  WorldConfig c = fixtures::tiny_world(0);
  c.placement = BuildingPlacement::Random;
  c.building_count = 200;
  try {
    generate_world(c);
    FAIL("expected a generation error");
  } catch (const GenerationError& e) {
    CHECK(std::string(e.what()).find("overlap") != std::string::npos);
  }
  c.placement = BuildingPlacement::RegularGrid;
  CHECK_THROWS_AS(generate_world(c), GenerationError);
}

TEST_CASE("too few exposed faces for the requested windows is an error") {
  WorldConfig c = fixtures::tiny_world(0);
  c.building_count = 1;
  c.window_min = 5000;
  c.window_max = 6000;
  CHECK_THROWS_AS(generate_world(c), GenerationError);
}

TEST_CASE("world JSON round-trips") {
  const World w = generate_world(fixtures::tiny_world(5));
  const nlohmann::json j = world_to_json(w);
  CHECK(j.at("format") == "mripp-world");
  CHECK(j.at("version") == kWorldFormatVersion);
  const World back = world_from_json(j);
  CHECK(back.occupied == w.occupied);
  REQUIRE(back.targets.size() == w.targets.size());
  for (std::size_t i = 0; i < w.targets.size(); ++i) {
    CHECK(back.targets[i].voxel == w.targets[i].voxel);
    CHECK(back.targets[i].normal == w.targets[i].normal);
  }
  CHECK(world_to_json(back).dump() == j.dump());
}

TEST_CASE("voxel_of clamps the upper boundary into the last cell") {
  const GridShape s{10, 10, 10, 0.1};
  CHECK(s.voxel_of(Vec3(1.0, 1.0, 1.0)) == Voxel(9, 9, 9));
  CHECK(s.voxel_of(Vec3(0.0, 0.05, 0.15)) == Voxel(0, 0, 1));
  for (std::size_t i = 0; i < s.size(); i += 37) CHECK(s.index(s.voxel(i)) == i);
}
