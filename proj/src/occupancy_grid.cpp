#include "mripp/occupancy_grid.hpp"

#include <cmath>
#include <limits>

namespace mripp {

bool OccupancyGrid::observe(const Voxel& v, VoxelState s) {
  auto& cell = states_[shape_.index(v)];
  if (cell != static_cast<std::uint8_t>(VoxelState::Unknown) || s == VoxelState::Unknown) return false;
  cell = static_cast<std::uint8_t>(s);
  --unknown_;
  return true;
}

void traverse_segment(const GridShape& shape, const Vec3& from, const Vec3& to,
                      const std::function<bool(const Voxel&, double)>& visit) {
  const Vec3 dir = to - from;
  Voxel v = shape.voxel_of(from);
  if (!visit(v, 0.0)) return;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double h = shape.voxel_size;
  int step[3];
  double t_max[3];
  double t_delta[3];
  for (int a = 0; a < 3; ++a) {
    if (dir[a] > 0.0) {
      step[a] = 1;
      t_max[a] = ((v[a] + 1) * h - from[a]) / dir[a];
      t_delta[a] = h / dir[a];
    } else if (dir[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (v[a] * h - from[a]) / dir[a];
      t_delta[a] = -h / dir[a];
    } else {
      step[a] = 0;
      t_max[a] = kInf;
      t_delta[a] = kInf;
    }
  }

  while (true) {
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    const double t = t_max[axis];
    if (t > 1.0) break;
    v[axis] += step[axis];
    if (!shape.contains(v)) break;
    if (!visit(v, t)) return;
    t_max[axis] += t_delta[axis];
  }
}

bool is_reachable(const OccupancyGrid& grid, const Vec3& from, const Vec3& to) {
  if (from == to) return grid.state_at(from) == VoxelState::Free;
  if (!grid.shape().bounds().contains(to)) return false;
  bool ok = true;
  traverse_segment(grid.shape(), from, to, [&](const Voxel& v, double) {
    if (grid.state(v) != VoxelState::Free) {
      ok = false;
      return false;
    }
    return true;
  });
  return ok;
}

}  // namespace mripp
