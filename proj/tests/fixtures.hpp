#pragma once

#include <vector>

#include "mripp/coordination.hpp"
#include "mripp/world.hpp"

namespace fixtures {

/// Obstacle-free world of n^3 voxels of edge h.
inline mripp::World empty_world(int n, double h) {
  mripp::World w;
  w.config.grid_resolution = n;
  w.config.building_count = 0;
  w.shape = mripp::GridShape{n, n, n, h};
  w.occupied.assign(w.shape.size(), 0);
  return w;
}

inline void block(mripp::World& w, const mripp::Voxel& v) { w.occupied[w.shape.index(v)] = 1; }

/// Adds a target on the face of voxel v facing normal.
inline int add_target(mripp::World& w, const mripp::Voxel& v, const mripp::Voxel& normal) {
  mripp::Target t;
  t.id = static_cast<int>(w.targets.size());
  t.voxel = v;
  t.normal = normal;
  t.point = w.shape.center(v) + 0.5 * w.shape.voxel_size * normal.cast<double>();
  w.targets.push_back(t);
  return t.id;
}

/// Small tiny-profile world configuration.
inline mripp::WorldConfig tiny_world(std::uint64_t seed) {
  mripp::WorldConfig c;
  c.seed = seed;
  c.grid_resolution = 20;
  c.building_count = 9;
  c.building_footprint = 0.15;
  c.window_min = 60;
  c.window_max = 80;
  return c;
}

/// Graph with the given utility means/variances in features; all unmasked
/// unless a mask is given.
inline mripp::CoordinationGraph toy_graph(const std::vector<double>& u, const std::vector<double>& p,
                                          std::vector<std::uint8_t> mask = {}) {
  mripp::CoordinationGraph g;
  const auto n = static_cast<Eigen::Index>(u.size());
  g.current = mripp::Action{mripp::Vec3(0.5, 0.5, 0.5), mripp::ViewDirection::North};
  g.features = mripp::Matrix::Zero(n, mripp::kFeatureCount);
  for (Eigen::Index i = 0; i < n; ++i) {
    g.nodes.push_back(mripp::Action{mripp::Vec3(0.5 + 0.01 * static_cast<double>(i), 0.5, 0.5),
                                    mripp::ViewDirection::North});
    g.edge_costs.push_back(0.01 * static_cast<double>(i));
    g.features(i, 5) = u[static_cast<std::size_t>(i)];
    g.features(i, 6) = p[static_cast<std::size_t>(i)];
    g.features(i, 8) = 1.0;
  }
  g.budget_mask = mask.empty() ? std::vector<std::uint8_t>(u.size(), 1) : std::move(mask);
  g.state_features = Eigen::RowVectorXd::Zero(mripp::kFeatureCount);
  g.remaining_budget = 1.0;
  return g;
}

}  // namespace fixtures
