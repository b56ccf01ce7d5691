#include "mripp/coordination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mripp/errors.hpp"

namespace mripp {

void CoordinationParams::validate() const {
  if (candidates < 1) throw PreconditionError("candidates (L) must be >= 1");
  if (!(neighborhood > 0.0)) throw PreconditionError("neighborhood (C) must be > 0");
  if (!(collision_distance > 0.0)) throw PreconditionError("collision_distance (d_c) must be > 0");
  if (!(collision_distance < comm_range)) throw PreconditionError("collision_distance (d_c) must be < comm_range (rho)");
  if (attempts_per_candidate < 1) throw PreconditionError("attempts_per_candidate must be >= 1");
}

Matrix utility_inputs(std::span<const Action> actions) {
  Matrix x(static_cast<Eigen::Index>(actions.size()), 5);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const Action& a = actions[i];
    x.row(static_cast<Eigen::Index>(i)) << a.x(), a.y(), a.z(), std::cos(a.d()), std::sin(a.d());
  }
  return x;
}

Matrix comm_inputs(std::span<const Action> actions) {
  Matrix x(static_cast<Eigen::Index>(actions.size()), 3);
  for (std::size_t i = 0; i < actions.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = actions[i].position.transpose();
  return x;
}

Matrix comm_inputs(std::span<const Vec3> positions) {
  Matrix x(static_cast<Eigen::Index>(positions.size()), 3);
  for (std::size_t i = 0; i < positions.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = positions[i].transpose();
  return x;
}

GaussianProcess make_utility_gp(const GpParams& p) {
  Vector ls(5);
  ls << p.position_lengthscale, p.position_lengthscale, p.position_lengthscale, p.direction_lengthscale,
      p.direction_lengthscale;
  return GaussianProcess(Kernel(ls, p.signal_variance), p.noise_variance, p.prior_mean, p.max_points);
}

GaussianProcess make_comm_gp(const GpParams& p) {
  return GaussianProcess(Kernel(Vector::Constant(3, p.position_lengthscale), p.signal_variance), p.noise_variance, 0.0,
                         p.max_points);
}

bool CoordinationGraph::any_unmasked() const {
  return std::any_of(budget_mask.begin(), budget_mask.end(), [](std::uint8_t m) { return m != 0; });
}

std::size_t CoordinationGraph::unmasked_count() const {
  return static_cast<std::size_t>(std::count(budget_mask.begin(), budget_mask.end(), 1));
}

std::vector<Action> sample_candidates(const OccupancyGrid& grid, const Action& current, std::span<const Vec3> peers,
                                      const CoordinationParams& params, Rng& rng) {
  if (grid.state_at(current.position) != VoxelState::Free)
    throw PreconditionError("sample_candidates: current pose must be in a known-free voxel");

  std::vector<Vec3> nearby;
  for (const Vec3& p : peers)
    if ((p - current.position).norm() <= params.comm_range) nearby.push_back(p);

  const Bounds bounds = grid.shape().bounds();
  const double c = params.neighborhood;
  const long budget = static_cast<long>(params.attempts_per_candidate) * params.candidates;
  std::vector<Action> out;
  out.reserve(static_cast<std::size_t>(params.candidates));
  for (long attempt = 0; attempt < budget && static_cast<int>(out.size()) < params.candidates; ++attempt) {
    const Vec3 offset(rng.uniform(-c, c), rng.uniform(-c, c), rng.uniform(-c, c));
    const auto dir = direction_from_index(static_cast<int>(rng.below(kNumDirections)));
    if (params.norm == NeighborhoodNorm::Euclidean && offset.norm() > c) continue;
    const Vec3 p = current.position + offset;
    if (!bounds.contains(p)) continue;
    if (grid.state_at(p) != VoxelState::Free) continue;
    if (std::any_of(nearby.begin(), nearby.end(),
                    [&](const Vec3& q) { return (q - p).norm() <= params.collision_distance; }))
      continue;
    if (!is_reachable(grid, current.position, p)) continue;
    out.push_back(Action{p, dir});
  }
  if (out.empty()) throw TrappedError("no valid candidate action in the local neighbourhood");
  return out;
}

Matrix action_features(std::span<const Action> actions, const GaussianProcess& util_gp,
                       const GaussianProcess* comm_gp) {
  const auto n = static_cast<Eigen::Index>(actions.size());
  Matrix f(n, kFeatureCount);
  const Matrix ux = utility_inputs(actions);
  f.leftCols(5) = ux;
  const PosteriorDiag util = util_gp.posterior_diag(ux);
  f.col(5) = util.mean;
  f.col(6) = util.variance;
  if (comm_gp != nullptr) {
    const PosteriorDiag comm = comm_gp->posterior_diag(comm_inputs(actions));
    f.col(7) = comm.mean;
    f.col(8) = comm.variance;
  } else {
    f.col(7).setZero();
    f.col(8).setOnes();
  }
  return f;
}

CoordinationGraph build_graph(std::vector<Action> candidates, const Action& current, const GaussianProcess& util_gp,
                              const GaussianProcess* comm_gp, double remaining_budget,
                              std::span<const Action> recent_path) {
  if (candidates.empty()) throw PreconditionError("build_graph: candidates must be nonempty");
  CoordinationGraph g;
  g.current = current;
  g.remaining_budget = remaining_budget;
  g.nodes = std::move(candidates);
  g.features = action_features(g.nodes, util_gp, comm_gp);
  g.edge_costs.reserve(g.nodes.size());
  g.budget_mask.reserve(g.nodes.size());
  for (const Action& a : g.nodes) {
    const double cost = distance(current, a);
    g.edge_costs.push_back(cost);
    g.budget_mask.push_back(cost <= remaining_budget ? 1 : 0);
  }
  const std::vector<Action> self{current};
  const std::span<const Action> poses = recent_path.empty() ? std::span<const Action>(self) : recent_path;
  g.state_features = action_features(poses, util_gp, comm_gp).colwise().mean();
  return g;
}

}  // namespace mripp
