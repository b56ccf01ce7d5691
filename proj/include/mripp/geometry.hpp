#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <numbers>

namespace mripp {

using Vec3 = Eigen::Vector3d;

/// Discrete sensor view direction, d = index * pi/2 about the z axis.
enum class ViewDirection : int { East = 0, North = 1, West = 2, South = 3 };

inline constexpr int kNumDirections = 4;

inline double heading(ViewDirection d) { return static_cast<int>(d) * std::numbers::pi / 2.0; }

inline ViewDirection direction_from_index(int i) { return static_cast<ViewDirection>(((i % 4) + 4) % 4); }

/// Unit vector of the view axis in the xy plane.
inline Vec3 view_axis(ViewDirection d) {
  static const std::array<Vec3, 4> axes = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(-1, 0, 0), Vec3(0, -1, 0)};
  return axes[static_cast<int>(d)];
}

/// A pose a robot can move to and sense from: (x, y, z, d) in unit-cube
/// coordinates.
struct Action {
  Vec3 position = Vec3::Zero();
  ViewDirection direction = ViewDirection::North;

  double x() const { return position.x(); }
  double y() const { return position.y(); }
  double z() const { return position.z(); }
  double d() const { return heading(direction); }

  bool operator==(const Action& o) const { return position == o.position && direction == o.direction; }
};

inline double distance(const Action& a, const Action& b) { return (a.position - b.position).norm(); }

/// Axis-aligned box [lo, hi].
struct Bounds {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Ones();

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

}  // namespace mripp
