#pragma once

#include <vector>

#include "mripp/geometry.hpp"
#include "mripp/occupancy_grid.hpp"
#include "mripp/world.hpp"

namespace mripp {

/// Square-pyramid depth sensor with a noiseless target classifier.
struct SensorModel {
  double fov_deg = 90.0;
  double range = 0.24;
  /// Rays per pyramid axis for occupancy updates; 0 picks a density that
  /// keeps ray spacing near one voxel at full range.
  int rays_per_axis = 0;

  static SensorModel from_world(const WorldConfig& c) { return {c.sensor_fov_deg, c.sensor_range, 0}; }
  int effective_rays(const GridShape& shape) const;
  /// True if p lies inside the view pyramid of pose, within range.
  bool in_frustum(const Action& pose, const Vec3& p) const;
};

struct SensorObservation {
  Action pose;
  std::vector<int> visible_targets;
  std::vector<std::size_t> freed_voxels;
  std::vector<std::size_t> occupied_voxels;
};

/// Casts the view pyramid from pose into the ground truth and updates grid.
/// Throws PreconditionError unless pose sits in a voxel grid knows is free.
SensorObservation sense(const World& world, OccupancyGrid& grid, const SensorModel& sensor, const Action& pose);

/// Unobstructed line of sight from eye to target (the target's own voxel
/// does not occlude).
bool line_of_sight(const World& world, const Vec3& eye, const Target& target);

}  // namespace mripp
