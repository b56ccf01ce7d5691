#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mripp/coordination.hpp"
#include "mripp/gp.hpp"
#include "mripp/occupancy_grid.hpp"
#include "mripp/planner.hpp"
#include "mripp/reward.hpp"
#include "mripp/sensor.hpp"
#include "mripp/world.hpp"

namespace mripp {

inline constexpr double kUnlimitedRange = std::numeric_limits<double>::infinity();

struct EpisodeConfig {
  int robots = 3;
  /// Total budget B; each robot receives B / N.
  double total_budget = 10.0;
  int max_steps = 256;
  Action start{Vec3::Zero(), ViewDirection::North};
  WorldConfig world;
  CoordinationParams coordination;
  GpParams gp;
  RewardParams reward;
  /// Ablation switch: without it the communication features stay at the
  /// prior and r_c is 0.
  bool use_comm_gp = true;
  /// Centralized reward computation (training only).
  bool compute_rewards = false;
  /// One spec for all robots, or one per robot.
  std::vector<PlannerSpec> planners{PlannerSpec{}};
  std::uint64_t seed = 0;

  void validate() const;
  const PlannerSpec& planner_for(int robot) const;
};

nlohmann::json to_json(const CoordinationParams& c);
CoordinationParams coordination_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GpParams& g);
GpParams gp_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RewardParams& r);
RewardParams reward_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EpisodeConfig& c);
EpisodeConfig episode_config_from_json(const nlohmann::json& j);

/// Per-robot state. Everything a planner reads comes from here.
struct RobotState {
  int id = 0;
  std::vector<Action> path;
  double initial_budget = 0.0;
  double remaining_budget = 0.0;
  OccupancyGrid occupancy;
  GaussianProcess util_gp;
  GaussianProcess comm_gp;
  /// Number of each peer's waypoints already received.
  std::vector<std::size_t> known_peer_waypoints;
  /// Last communicated position of each peer (nullopt before first contact).
  std::vector<std::optional<Vec3>> peer_positions;
  std::set<int> seen_targets;
  bool alive = true;

  const Action& pose() const { return path.back(); }
  double path_length() const;
};

/// One (step, robot) line of the episode trace.
struct StepRecord {
  int step = 0;
  int robot = 0;
  /// move | wait | trapped | depleted
  std::string event;
  Action pose;
  int action = -1;
  int candidates = 0;
  int zeta = 0;
  RewardBreakdown reward;
  double budget = 0.0;
  std::vector<int> comm;
  double pct_targets = 0.0;
};

nlohmann::json to_json(const StepRecord& r);

struct SafetyReport {
  int budget_violations = 0;
  int obstacle_traversals = 0;
  int proximity_violations = 0;

  int total() const { return budget_violations + obstacle_traversals + proximity_violations; }
};

/// A policy decision with the reward it earned, for the trainer.
struct DecisionRecord {
  int robot = 0;
  int step = 0;
  PolicyDecision decision;
  double reward = 0.0;
  bool done = false;
};

struct EpisodeResult {
  std::vector<StepRecord> records;
  /// Cumulative percentage of targets discovered after each step.
  std::vector<double> pct_curve;
  int targets_found = 0;
  int total_targets = 0;
  double pct_targets = 0.0;
  int steps = 0;
  int zeta_sum = 0;
  SafetyReport safety;
  /// Seconds spent per planning decision (graph construction + planner).
  std::vector<double> planning_times;
  std::vector<DecisionRecord> decisions;
  std::vector<double> per_robot_budget;
};

/// Optional observer called after every timestep with the robots' states.
using StepObserver = std::function<void(int step, const std::vector<RobotState>& robots)>;

/// Called after the centralized rewards of a step are computed, with the
/// start-of-step global utility GP and the critic's inputs and outputs.
using RewardObserver = std::function<void(int step, const GaussianProcess& global_before,
                                          std::span<const RobotStepRecord> records,
                                          std::span<const RewardBreakdown> rewards)>;

/// Runs one lockstep episode in world. policy backs PlannerKind::Policy
/// robots and may be null otherwise.
EpisodeResult run_episode(const World& world, const EpisodeConfig& config, std::shared_ptr<const PolicyNet> policy,
                          const StepObserver& observer = {}, const RewardObserver& reward_observer = {});

/// Single-hop exchange between every pair within range: each side learns the
/// other's unseen waypoints and current position; communication GPs are
/// conditioned on newly learned waypoints only. Returns, per robot, the ids
/// it talked to.
std::vector<std::vector<int>> communicate(std::vector<RobotState>& robots, double range, bool update_gp);

/// Trace as line-delimited JSON: a header line with the config, then one line
/// per StepRecord.
std::string trace_to_jsonl(const EpisodeConfig& config, const EpisodeResult& result);

inline constexpr int kTraceFormatVersion = 1;

struct ParsedTrace {
  EpisodeConfig config;
  std::vector<nlohmann::json> records;
};

ParsedTrace parse_trace(const std::string& jsonl);

struct ReplayReport {
  bool identical = false;
  std::size_t records_compared = 0;
  /// Description of the first mismatch, empty when identical.
  std::string mismatch;
};

/// Regenerates the world from the trace header, reruns the episode and
/// compares it record by record.
ReplayReport replay_trace(const std::string& jsonl, std::shared_ptr<const PolicyNet> policy);

}  // namespace mripp
