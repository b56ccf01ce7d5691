#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mripp/geometry.hpp"
#include "mripp/world.hpp"

namespace mripp {

enum class VoxelState : std::uint8_t { Free = 0, Unknown = 1, Occupied = 2 };

/// A robot's belief over the voxel lattice. Voxels start unknown and only
/// ever move to free or occupied.
class OccupancyGrid {
 public:
  explicit OccupancyGrid(const GridShape& shape)
      : shape_(shape), states_(shape.size(), static_cast<std::uint8_t>(VoxelState::Unknown)), unknown_(shape.size()) {}

  const GridShape& shape() const { return shape_; }
  VoxelState state(const Voxel& v) const { return static_cast<VoxelState>(states_[shape_.index(v)]); }
  VoxelState state_at(const Vec3& p) const { return state(shape_.voxel_of(p)); }

  /// Resolves an unknown voxel. Returns true if the state changed; a known
  /// voxel is never rewritten.
  bool observe(const Voxel& v, VoxelState s);

  std::size_t unknown_count() const { return unknown_; }
  const std::vector<std::uint8_t>& raw() const { return states_; }

 private:
  GridShape shape_;
  std::vector<std::uint8_t> states_;
  std::size_t unknown_;
};

/// Exact voxel traversal of the segment from -> to (Amanatides & Woo).
/// The visitor receives each voxel with the segment parameter at which the
/// segment enters it, in order, and returns false to stop early. Voxels
/// outside the lattice end the walk.
void traverse_segment(const GridShape& shape, const Vec3& from, const Vec3& to,
                      const std::function<bool(const Voxel&, double t_enter)>& visit);

/// True iff every voxel the straight segment touches is known free.
bool is_reachable(const OccupancyGrid& grid, const Vec3& from, const Vec3& to);
inline bool is_reachable(const OccupancyGrid& grid, const Action& from, const Action& to) {
  return is_reachable(grid, from.position, to.position);
}

}  // namespace mripp
