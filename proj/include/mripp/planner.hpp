#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mripp/coordination.hpp"
#include "mripp/gp.hpp"
#include "mripp/occupancy_grid.hpp"
#include "mripp/policy.hpp"
#include "mripp/random.hpp"

namespace mripp {

/// Everything a robot knows when it plans. Planners must not look past it.
struct RobotView {
  int id = 0;
  const OccupancyGrid* grid = nullptr;
  const GaussianProcess* util_gp = nullptr;
  /// Null when the communication GP is disabled.
  const GaussianProcess* comm_gp = nullptr;
  std::span<const Action> path;
  double remaining_budget = 0.0;
  double initial_budget = 0.0;
  /// Positions of peers within communication range at planning time.
  std::vector<Vec3> peer_positions;
  /// Waypoints already chosen this step by earlier robots within range
  /// (sequential allocation).
  std::vector<Action> peer_plans;
};

struct PlanningContext {
  const CoordinationGraph& graph;
  const RobotView& view;
  const CoordinationParams& coordination;
  Rng& rng;
};

/// A policy decision kept for on-policy training.
struct PolicyDecision {
  PolicyInput input;
  std::size_t index = 0;
  double log_prob = 0.0;
  double value = 0.0;
};

class Planner {
 public:
  virtual ~Planner() = default;
  virtual std::string name() const = 0;
  /// Returns the index of an unmasked node of ctx.graph.
  virtual std::size_t plan(const PlanningContext& ctx) = 0;
  virtual std::optional<PolicyDecision> last_decision() const { return std::nullopt; }
  /// Waypoints averaged into the graph's planning state.
  virtual int state_pool() const { return 1; }
};

enum class PlannerKind { Policy, Random, Greedy, Mcts, RigTree };

std::string to_string(PlannerKind k);
PlannerKind planner_kind_from_string(const std::string& s);

struct PlannerSpec {
  PlannerKind kind = PlannerKind::Policy;
  SelectMode policy_mode = SelectMode::Greedy;
  /// Exploration weight w of the greedy score u + w * sqrt(P).
  double ucb_weight = 0.1;
  /// The same weight inside the MCTS and RIG-tree surrogate rewards.
  double search_weight = 1.0;
  int mcts_iterations = 200;
  int mcts_horizon = 8;
  double mcts_exploration = 1.4142135623730951;
  int mcts_children = 8;
  double mcts_discount = 0.9;
  int rig_expansions = 300;
  /// Half-width of the RIG sampling box, as a multiple of C.
  double rig_extent = 2.0;

  void validate() const;
};

nlohmann::json to_json(const PlannerSpec& s);
PlannerSpec planner_spec_from_json(const nlohmann::json& j);

/// policy is required for PlannerKind::Policy and ignored otherwise.
std::unique_ptr<Planner> make_planner(const PlannerSpec& spec, std::shared_ptr<const PolicyNet> policy);

class PolicyPlanner : public Planner {
 public:
  PolicyPlanner(std::shared_ptr<const PolicyNet> net, SelectMode mode);
  std::string name() const override { return "policy"; }
  std::size_t plan(const PlanningContext& ctx) override;
  std::optional<PolicyDecision> last_decision() const override { return last_; }
  int state_pool() const override { return net_->config().state_pool; }

 private:
  std::shared_ptr<const PolicyNet> net_;
  SelectMode mode_;
  std::optional<PolicyDecision> last_;
};

}  // namespace mripp
