#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mripp/geometry.hpp"
#include "mripp/gp.hpp"
#include "mripp/occupancy_grid.hpp"
#include "mripp/random.hpp"

namespace mripp {

enum class NeighborhoodNorm { Infinity, Euclidean };

struct CoordinationParams {
  /// Candidate actions per graph (L).
  int candidates = 80;
  /// Radius C of the local sampling neighbourhood.
  double neighborhood = 0.2;
  NeighborhoodNorm norm = NeighborhoodNorm::Infinity;
  /// Collision distance d_c around peers.
  double collision_distance = 0.05;
  /// Communication range rho; infinity means global communication.
  double comm_range = 0.3;
  /// Rejection-sampling budget as a multiple of L.
  int attempts_per_candidate = 50;

  void validate() const;
};

struct GpParams {
  double position_lengthscale = 0.15;
  double direction_lengthscale = 1.0;
  double signal_variance = 1.0;
  double noise_variance = 1e-4;
  double prior_mean = 0.0;
  std::size_t max_points = 400;
};

/// Utility-GP inputs: (x, y, z, cos d, sin d), one row per action.
Matrix utility_inputs(std::span<const Action> actions);
/// Communication-GP inputs: positions only.
Matrix comm_inputs(std::span<const Action> actions);
Matrix comm_inputs(std::span<const Vec3> positions);

GaussianProcess make_utility_gp(const GpParams& p);
GaussianProcess make_comm_gp(const GpParams& p);

inline constexpr int kFeatureCount = 9;

/// Per-step graph of candidate actions for one robot. Row n of features is
/// [x, y, z, cos d, sin d, u_util, P_util, u_comm, P_comm] of node n.
struct CoordinationGraph {
  Action current;
  std::vector<Action> nodes;
  std::vector<double> edge_costs;
  Matrix features;
  std::vector<std::uint8_t> budget_mask;
  /// Planning-state summary: mean feature row of the recent path poses.
  Eigen::RowVectorXd state_features;
  double remaining_budget = 0.0;

  std::size_t size() const { return nodes.size(); }
  bool any_unmasked() const;
  std::size_t unmasked_count() const;
};

/// Samples up to L collision-free candidates around current. peers are the
/// last known positions of other robots; only those within comm_range are
/// considered. Throws TrappedError when no candidate survives.
std::vector<Action> sample_candidates(const OccupancyGrid& grid, const Action& current, std::span<const Vec3> peers,
                                      const CoordinationParams& params, Rng& rng);

/// Feature rows for arbitrary actions, from one batched query per GP.
/// comm_gp may be null, in which case the communication columns hold the
/// prior (0 mean, unit variance).
Matrix action_features(std::span<const Action> actions, const GaussianProcess& util_gp,
                       const GaussianProcess* comm_gp);

/// recent_path holds the last k executed poses (ending with current) used for
/// the planning-state summary; empty means just current.
CoordinationGraph build_graph(std::vector<Action> candidates, const Action& current, const GaussianProcess& util_gp,
                              const GaussianProcess* comm_gp, double remaining_budget,
                              std::span<const Action> recent_path = {});

}  // namespace mripp
