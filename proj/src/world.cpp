#include "mripp/world.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mripp/errors.hpp"
#include "mripp/random.hpp"

namespace mripp {

std::string to_string(BuildingPlacement p) { return p == BuildingPlacement::RegularGrid ? "regular_grid" : "random"; }

BuildingPlacement placement_from_string(const std::string& s) {
  if (s == "regular_grid") return BuildingPlacement::RegularGrid;
  if (s == "random") return BuildingPlacement::Random;
  throw PreconditionError("building_placement must be regular_grid or random, got '" + s + "'");
}

void WorldConfig::validate() const {
  if (grid_resolution < 4) throw PreconditionError("grid_resolution must be >= 4");
  if (building_count < 0) throw PreconditionError("building_count must be >= 0");
  if (window_min <= 0 || window_max <= 0 || window_min > window_max)
    throw PreconditionError("window_count_range must satisfy 0 < lower <= upper");
  if (!(sensor_fov_deg > 0.0 && sensor_fov_deg < 180.0)) throw PreconditionError("sensor_fov_deg must be in (0, 180)");
  if (!(sensor_range > 0.0 && sensor_range <= 1.0)) throw PreconditionError("sensor_range must be in (0, 1]");
  if (!(world_scale >= 1.0)) throw PreconditionError("world_scale must be >= 1");
  if (!(building_footprint > 0.0)) throw PreconditionError("building_footprint must be > 0");
  if (!(building_height_min > 0.0 && building_height_min <= building_height_max && building_height_max <= 1.0))
    throw PreconditionError("building heights must satisfy 0 < min <= max <= 1");
  if (start_clearance < 0.0) throw PreconditionError("start_clearance must be >= 0");
}

Voxel GridShape::voxel_of(const Vec3& p) const {
  Voxel v;
  const int n[3] = {nx, ny, nz};
  for (int a = 0; a < 3; ++a) {
    int i = static_cast<int>(std::floor(p[a] / voxel_size));
    v[a] = std::clamp(i, 0, n[a] - 1);
  }
  return v;
}

std::size_t World::obstacle_count() const { return static_cast<std::size_t>(std::count(occupied.begin(), occupied.end(), 1)); }

std::vector<std::size_t> World::obstacle_voxels() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < occupied.size(); ++i)
    if (occupied[i]) out.push_back(i);
  return out;
}

namespace {

struct Footprint {
  int x0, y0, size, height;

  bool overlaps(const Footprint& o, int gap) const {
    return x0 < o.x0 + o.size + gap && o.x0 < x0 + size + gap && y0 < o.y0 + o.size + gap && o.y0 < y0 + size + gap;
  }
};

double clearance_from_origin(const Footprint& f, double h) {
  // Nearest xy point of the footprint to the origin.
  const double dx = f.x0 * h;
  const double dy = f.y0 * h;
  return std::hypot(dx, dy);
}

constexpr int kMaxPlacementAttempts = 1000;

}  // namespace

World generate_world(const WorldConfig& config) {
  config.validate();
  Rng rng(Rng::mix(config.seed, 0x5eed));

  const double h = 1.0 / config.grid_resolution;
  const double side = std::sqrt(config.world_scale);
  GridShape shape;
  shape.nx = static_cast<int>(std::lround(config.grid_resolution * side));
  shape.ny = shape.nx;
  shape.nz = config.grid_resolution;
  shape.voxel_size = h;

  World world;
  world.config = config;
  world.shape = shape;
  world.occupied.assign(shape.size(), 0);

  const int count = static_cast<int>(std::lround(config.building_count * config.world_scale));
  const int fp = std::max(1, static_cast<int>(std::lround(config.building_footprint / h)));
  auto draw_height = [&]() {
    const double z = rng.uniform(config.building_height_min, config.building_height_max);
    return std::clamp(static_cast<int>(std::lround(z / h)), 1, shape.nz - 1);
  };

  std::vector<Footprint> buildings;
  if (count > 0 && config.placement == BuildingPlacement::RegularGrid) {
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
    const int rows = (count + cols - 1) / cols;
    const double cell_x = static_cast<double>(shape.nx) / cols;
    const double cell_y = static_cast<double>(shape.ny) / rows;
    if (fp + 1 > static_cast<int>(std::floor(std::min(cell_x, cell_y))))
      throw GenerationError("regular_grid placement: footprint of " + std::to_string(fp) +
                            " voxels does not fit a grid cell with a one-voxel gap");
    for (int b = 0; b < count; ++b) {
      const int r = b / cols;
      const int c = b % cols;
      Footprint f;
      f.size = fp;
      f.x0 = static_cast<int>(std::lround((c + 0.5) * cell_x - fp / 2.0));
      f.y0 = static_cast<int>(std::lround((r + 0.5) * cell_y - fp / 2.0));
      f.height = draw_height();
      if (clearance_from_origin(f, h) < config.start_clearance)
        throw GenerationError("regular_grid placement: building " + std::to_string(b) +
                              " violates start_clearance around the origin");
      buildings.push_back(f);
    }
  } else if (count > 0) {
    for (int b = 0; b < count; ++b) {
      bool placed = false;
      for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
        Footprint f;
        f.size = fp;
        f.x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, shape.nx - fp + 1))));
        f.y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, shape.ny - fp + 1))));
        if (clearance_from_origin(f, h) < config.start_clearance) continue;
        if (std::any_of(buildings.begin(), buildings.end(), [&](const Footprint& o) { return f.overlaps(o, 1); }))
          continue;
        f.height = draw_height();
        buildings.push_back(f);
        placed = true;
      }
      if (!placed)
        throw GenerationError("random placement: building " + std::to_string(b) +
                              " could not be placed without overlapping footprints after " +
                              std::to_string(kMaxPlacementAttempts) + " attempts");
    }
  }

  for (const Footprint& f : buildings)
    for (int z = 0; z < f.height; ++z)
      for (int y = f.y0; y < f.y0 + f.size; ++y)
        for (int x = f.x0; x < f.x0 + f.size; ++x)
          if (shape.contains({x, y, z})) world.occupied[shape.index({x, y, z})] = 1;

  // Exposed side faces, in lattice order.
  static const Voxel kSides[4] = {Voxel(1, 0, 0), Voxel(-1, 0, 0), Voxel(0, 1, 0), Voxel(0, -1, 0)};
  std::vector<std::pair<std::size_t, int>> faces;
  for (std::size_t i = 0; i < world.occupied.size(); ++i) {
    if (!world.occupied[i]) continue;
    const Voxel v = shape.voxel(i);
    for (int s = 0; s < 4; ++s) {
      const Voxel n = v + kSides[s];
      if (shape.contains(n) && !world.occupied[shape.index(n)]) faces.emplace_back(i, s);
    }
  }

  if (!faces.empty()) {
    const int lo = static_cast<int>(std::lround(config.window_min * config.world_scale));
    const int hi = static_cast<int>(std::lround(config.window_max * config.world_scale));
    const int windows = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    if (static_cast<std::size_t>(windows) > faces.size())
      throw GenerationError("window_count_range: " + std::to_string(windows) + " windows requested but only " +
                            std::to_string(faces.size()) + " exposed building faces exist");
    // Partial Fisher-Yates selection.
    for (int k = 0; k < windows; ++k) {
      const std::size_t j = k + rng.below(faces.size() - k);
      std::swap(faces[k], faces[j]);
    }
    faces.resize(windows);
    std::sort(faces.begin(), faces.end());
    for (int k = 0; k < windows; ++k) {
      Target t;
      t.id = k;
      t.voxel = shape.voxel(faces[k].first);
      t.normal = kSides[faces[k].second];
      t.point = shape.center(t.voxel) + t.normal.cast<double>() * (h / 2.0);
      world.targets.push_back(t);
    }
  }
  return world;
}

nlohmann::json to_json(const WorldConfig& c) {
  return {{"seed", c.seed},
          {"grid_resolution", c.grid_resolution},
          {"building_count", c.building_count},
          {"building_placement", to_string(c.placement)},
          {"window_count_range", {c.window_min, c.window_max}},
          {"sensor_fov_deg", c.sensor_fov_deg},
          {"sensor_range", c.sensor_range},
          {"world_scale", c.world_scale},
          {"building_footprint", c.building_footprint},
          {"building_height_range", {c.building_height_min, c.building_height_max}},
          {"start_clearance", c.start_clearance}};
}

WorldConfig world_config_from_json(const nlohmann::json& j) {
  WorldConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.grid_resolution = j.at("grid_resolution").get<int>();
  c.building_count = j.at("building_count").get<int>();
  c.placement = placement_from_string(j.at("building_placement").get<std::string>());
  c.window_min = j.at("window_count_range").at(0).get<int>();
  c.window_max = j.at("window_count_range").at(1).get<int>();
  c.sensor_fov_deg = j.at("sensor_fov_deg").get<double>();
  c.sensor_range = j.at("sensor_range").get<double>();
  c.world_scale = j.at("world_scale").get<double>();
  c.building_footprint = j.at("building_footprint").get<double>();
  c.building_height_min = j.at("building_height_range").at(0).get<double>();
  c.building_height_max = j.at("building_height_range").at(1).get<double>();
  c.start_clearance = j.at("start_clearance").get<double>();
  return c;
}

nlohmann::json world_to_json(const World& world) {
  nlohmann::json targets = nlohmann::json::array();
  for (const Target& t : world.targets) {
    targets.push_back({{"id", t.id},
                       {"voxel", {t.voxel.x(), t.voxel.y(), t.voxel.z()}},
                       {"normal", {t.normal.x(), t.normal.y(), t.normal.z()}},
                       {"point", {t.point.x(), t.point.y(), t.point.z()}}});
  }
  return {{"format", "mripp-world"},
          {"version", kWorldFormatVersion},
          {"config", to_json(world.config)},
          {"grid", {{"nx", world.shape.nx}, {"ny", world.shape.ny}, {"nz", world.shape.nz},
                    {"voxel_size", world.shape.voxel_size}}},
          {"obstacles", world.obstacle_voxels()},
          {"targets", targets}};
}

World world_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "mripp-world") throw PreconditionError("not a world document");
  if (j.value("version", 0) != kWorldFormatVersion)
    throw PreconditionError("unsupported world version " + std::to_string(j.value("version", 0)));
  World w;
  w.config = world_config_from_json(j.at("config"));
  const auto& g = j.at("grid");
  w.shape = {g.at("nx").get<int>(), g.at("ny").get<int>(), g.at("nz").get<int>(), g.at("voxel_size").get<double>()};
  w.occupied.assign(w.shape.size(), 0);
  for (const auto& idx : j.at("obstacles")) {
    const auto i = idx.get<std::size_t>();
    if (i >= w.occupied.size()) throw PreconditionError("obstacle index out of range");
    w.occupied[i] = 1;
  }
  for (const auto& tj : j.at("targets")) {
    Target t;
    t.id = tj.at("id").get<int>();
    t.voxel = {tj.at("voxel").at(0).get<int>(), tj.at("voxel").at(1).get<int>(), tj.at("voxel").at(2).get<int>()};
    t.normal = {tj.at("normal").at(0).get<int>(), tj.at("normal").at(1).get<int>(), tj.at("normal").at(2).get<int>()};
    t.point = {tj.at("point").at(0).get<double>(), tj.at("point").at(1).get<double>(), tj.at("point").at(2).get<double>()};
    w.targets.push_back(t);
  }
  return w;
}

}  // namespace mripp
