#include "mripp/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mripp/errors.hpp"

namespace mripp {

namespace {

// Right-handed frame of the view pyramid: axis, lateral, vertical.
struct ViewFrame {
  Vec3 axis;
  Vec3 lateral;
  Vec3 up;
};

ViewFrame frame_of(ViewDirection d) {
  const Vec3 axis = view_axis(d);
  const Vec3 up(0, 0, 1);
  return {axis, up.cross(axis), up};
}

}  // namespace

int SensorModel::effective_rays(const GridShape& shape) const {
  if (rays_per_axis > 0) return rays_per_axis;
  const double fov = fov_deg * std::numbers::pi / 180.0;
  return std::max(2, static_cast<int>(std::ceil(1.5 * fov * range / shape.voxel_size)) + 1);
}

bool SensorModel::in_frustum(const Action& pose, const Vec3& p) const {
  const ViewFrame f = frame_of(pose.direction);
  const Vec3 v = p - pose.position;
  if (v.norm() > range) return false;
  const double axial = v.dot(f.axis);
  if (axial <= 0.0) return false;
  const double t = std::tan(fov_deg * std::numbers::pi / 360.0);
  return std::abs(v.dot(f.lateral)) <= t * axial && std::abs(v.dot(f.up)) <= t * axial;
}

bool line_of_sight(const World& world, const Vec3& eye, const Target& target) {
  bool clear = true;
  traverse_segment(world.shape, eye, target.point, [&](const Voxel& v, double t_enter) {
    if (t_enter >= 1.0 - 1e-9) return false;
    if (v == target.voxel) return false;
    if (world.is_occupied(v)) {
      clear = false;
      return false;
    }
    return true;
  });
  return clear;
}

SensorObservation sense(const World& world, OccupancyGrid& grid, const SensorModel& sensor, const Action& pose) {
  if (!world.bounds().contains(pose.position)) throw PreconditionError("sense: pose outside world bounds");
  if (grid.state_at(pose.position) != VoxelState::Free)
    throw PreconditionError("sense: pose must be in a voxel known to be free");

  SensorObservation obs;
  obs.pose = pose;
  const ViewFrame f = frame_of(pose.direction);
  const double t = std::tan(sensor.fov_deg * std::numbers::pi / 360.0);
  const int rays = sensor.effective_rays(grid.shape());

  for (int i = 0; i < rays; ++i) {
    const double a = -t + 2.0 * t * i / (rays - 1);
    for (int j = 0; j < rays; ++j) {
      const double b = -t + 2.0 * t * j / (rays - 1);
      const Vec3 dir = (f.axis + a * f.lateral + b * f.up).normalized();
      const Vec3 end = pose.position + sensor.range * dir;
      traverse_segment(world.shape, pose.position, end, [&](const Voxel& v, double) {
        const bool hit = world.is_occupied(v);
        if (grid.observe(v, hit ? VoxelState::Occupied : VoxelState::Free))
          (hit ? obs.occupied_voxels : obs.freed_voxels).push_back(world.shape.index(v));
        return !hit;
      });
    }
  }

  for (const Target& target : world.targets) {
    const Vec3 to_eye = pose.position - target.point;
    if (to_eye.dot(target.normal.cast<double>()) <= 0.0) continue;
    if (!sensor.in_frustum(pose, target.point)) continue;
    if (line_of_sight(world, pose.position, target)) obs.visible_targets.push_back(target.id);
  }
  std::sort(obs.freed_voxels.begin(), obs.freed_voxels.end());
  std::sort(obs.occupied_voxels.begin(), obs.occupied_voxels.end());
  return obs;
}

}  // namespace mripp
