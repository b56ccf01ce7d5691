#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mripp/geometry.hpp"

namespace mripp {

using Voxel = Eigen::Vector3i;

enum class BuildingPlacement { RegularGrid, Random };

std::string to_string(BuildingPlacement p);
BuildingPlacement placement_from_string(const std::string& s);

/// Procedural urban world parameters. Geometry is expressed in unit-cube
/// units; world_scale multiplies the ground footprint area (and with it the
/// building and window counts) while keeping the voxel edge fixed.
struct WorldConfig {
  std::uint64_t seed = 0;
  int grid_resolution = 40;
  int building_count = 16;
  BuildingPlacement placement = BuildingPlacement::RegularGrid;
  int window_min = 200;
  int window_max = 250;
  double sensor_fov_deg = 90.0;
  double sensor_range = 0.24;
  double world_scale = 1.0;
  double building_footprint = 0.1;
  double building_height_min = 0.3;
  double building_height_max = 0.7;
  /// No building footprint may come closer than this to the xy origin,
  /// where robots start.
  double start_clearance = 0.1;

  void validate() const;
};

/// Dense voxel lattice over [0, nx*h] x [0, ny*h] x [0, nz*h].
struct GridShape {
  int nx = 0;
  int ny = 0;
  int nz = 0;
  double voxel_size = 1.0;

  std::size_t size() const { return static_cast<std::size_t>(nx) * ny * nz; }
  bool contains(const Voxel& v) const {
    return v.x() >= 0 && v.y() >= 0 && v.z() >= 0 && v.x() < nx && v.y() < ny && v.z() < nz;
  }
  std::size_t index(const Voxel& v) const {
    return (static_cast<std::size_t>(v.z()) * ny + v.y()) * nx + v.x();
  }
  Voxel voxel(std::size_t index) const {
    const int x = static_cast<int>(index % nx);
    const int y = static_cast<int>((index / nx) % ny);
    const int z = static_cast<int>(index / (static_cast<std::size_t>(nx) * ny));
    return {x, y, z};
  }
  /// Voxel containing p; points on the upper boundary map into the last cell.
  Voxel voxel_of(const Vec3& p) const;
  Vec3 center(const Voxel& v) const { return (v.cast<double>().array() + 0.5).matrix() * voxel_size; }
  Bounds bounds() const { return {Vec3::Zero(), Vec3(nx, ny, nz) * voxel_size}; }
};

/// A window: a point centred on an exposed side face of a building voxel.
struct Target {
  int id = 0;
  Voxel voxel = Voxel::Zero();
  Voxel normal = Voxel::Zero();
  Vec3 point = Vec3::Zero();
};

/// Ground truth. Immutable after generation.
struct World {
  WorldConfig config;
  GridShape shape;
  std::vector<std::uint8_t> occupied;
  std::vector<Target> targets;

  Bounds bounds() const { return shape.bounds(); }
  bool is_occupied(const Voxel& v) const { return occupied[shape.index(v)] != 0; }
  std::size_t obstacle_count() const;
  std::vector<std::size_t> obstacle_voxels() const;
};

World generate_world(const WorldConfig& config);

nlohmann::json to_json(const WorldConfig& config);
WorldConfig world_config_from_json(const nlohmann::json& j);

/// Versioned replay document: config, grid shape, obstacle voxels, targets.
nlohmann::json world_to_json(const World& world);
World world_from_json(const nlohmann::json& j);

inline constexpr int kWorldFormatVersion = 1;

}  // namespace mripp
