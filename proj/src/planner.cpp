#include "mripp/planner.hpp"

#include "mripp/baselines.hpp"
#include "mripp/errors.hpp"

namespace mripp {

std::string to_string(PlannerKind k) {
  switch (k) {
    case PlannerKind::Policy: return "policy";
    case PlannerKind::Random: return "random";
    case PlannerKind::Greedy: return "greedy";
    case PlannerKind::Mcts: return "mcts";
    case PlannerKind::RigTree: return "rig_tree";
  }
  return "unknown";
}

PlannerKind planner_kind_from_string(const std::string& s) {
  if (s == "policy") return PlannerKind::Policy;
  if (s == "random") return PlannerKind::Random;
  if (s == "greedy") return PlannerKind::Greedy;
  if (s == "mcts") return PlannerKind::Mcts;
  if (s == "rig_tree") return PlannerKind::RigTree;
  throw PreconditionError("unknown planner '" + s + "' (expected policy, random, greedy, mcts or rig_tree)");
}

void PlannerSpec::validate() const {
  if (ucb_weight < 0.0) throw PreconditionError("ucb_weight must be >= 0");
  if (search_weight < 0.0) throw PreconditionError("search_weight must be >= 0");
  if (mcts_iterations < 0) throw PreconditionError("mcts_iterations must be >= 0");
  if (mcts_horizon < 1) throw PreconditionError("mcts_horizon must be >= 1");
  if (mcts_exploration < 0.0) throw PreconditionError("mcts_exploration must be >= 0");
  if (mcts_children < 1) throw PreconditionError("mcts_children must be >= 1");
  if (!(mcts_discount > 0.0 && mcts_discount <= 1.0)) throw PreconditionError("mcts_discount must be in (0, 1]");
  if (rig_expansions < 1) throw PreconditionError("rig_expansions must be >= 1");
  if (!(rig_extent > 0.0)) throw PreconditionError("rig_extent must be > 0");
}

nlohmann::json to_json(const PlannerSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"policy_mode", s.policy_mode == SelectMode::Greedy ? "greedy" : "sample"},
          {"ucb_weight", s.ucb_weight},
          {"search_weight", s.search_weight},
          {"mcts_iterations", s.mcts_iterations},
          {"mcts_horizon", s.mcts_horizon},
          {"mcts_exploration", s.mcts_exploration},
          {"mcts_children", s.mcts_children},
          {"mcts_discount", s.mcts_discount},
          {"rig_expansions", s.rig_expansions},
          {"rig_extent", s.rig_extent}};
}

PlannerSpec planner_spec_from_json(const nlohmann::json& j) {
  PlannerSpec s;
  s.kind = planner_kind_from_string(j.at("kind").get<std::string>());
  s.policy_mode = j.at("policy_mode").get<std::string>() == "sample" ? SelectMode::Sample : SelectMode::Greedy;
  s.ucb_weight = j.at("ucb_weight").get<double>();
  s.search_weight = j.at("search_weight").get<double>();
  s.mcts_iterations = j.at("mcts_iterations").get<int>();
  s.mcts_horizon = j.at("mcts_horizon").get<int>();
  s.mcts_exploration = j.at("mcts_exploration").get<double>();
  s.mcts_children = j.at("mcts_children").get<int>();
  s.mcts_discount = j.at("mcts_discount").get<double>();
  s.rig_expansions = j.at("rig_expansions").get<int>();
  s.rig_extent = j.at("rig_extent").get<double>();
  return s;
}

PolicyPlanner::PolicyPlanner(std::shared_ptr<const PolicyNet> net, SelectMode mode) : net_(std::move(net)), mode_(mode) {
  if (!net_) throw PreconditionError("policy planner needs a policy network");
}

std::size_t PolicyPlanner::plan(const PlanningContext& ctx) {
  const double fraction = ctx.view.initial_budget > 0.0 ? ctx.view.remaining_budget / ctx.view.initial_budget : 0.0;
  PolicyDecision d;
  d.input = make_policy_input(ctx.graph, fraction);
  const PolicyOutput out = net_->evaluate(d.input);
  d.index = select_action(out.probs, mode_, &ctx.rng);
  d.log_prob = std::log(out.probs[d.index]);
  d.value = out.value;
  last_ = std::move(d);
  return last_->index;
}

namespace {

class RandomPlanner : public Planner {
 public:
  std::string name() const override { return "random"; }
  std::size_t plan(const PlanningContext& ctx) override { return random_planner(ctx.graph, ctx.rng); }
};

class GreedyPlanner : public Planner {
 public:
  explicit GreedyPlanner(double w) : weight_(w) {}
  std::string name() const override { return "greedy"; }
  std::size_t plan(const PlanningContext& ctx) override { return greedy_gp_planner(ctx.graph, weight_); }

 private:
  double weight_;
};

class MctsPlanner : public Planner {
 public:
  explicit MctsPlanner(PlannerSpec spec) : spec_(std::move(spec)) {}
  std::string name() const override { return "mcts"; }
  std::size_t plan(const PlanningContext& ctx) override { return mcts_planner(ctx, spec_); }

 private:
  PlannerSpec spec_;
};

class RigTreePlanner : public Planner {
 public:
  explicit RigTreePlanner(PlannerSpec spec) : spec_(std::move(spec)) {}
  std::string name() const override { return "rig_tree"; }
  std::size_t plan(const PlanningContext& ctx) override {
    if (auto idx = rig_tree_planner(ctx, spec_)) return *idx;
    // Tree could not grow: fall back to the GP score over the graph.
    return greedy_gp_planner(ctx.graph, spec_.ucb_weight);
  }

 private:
  PlannerSpec spec_;
};

}  // namespace

std::unique_ptr<Planner> make_planner(const PlannerSpec& spec, std::shared_ptr<const PolicyNet> policy) {
  spec.validate();
  switch (spec.kind) {
    case PlannerKind::Policy: return std::make_unique<PolicyPlanner>(std::move(policy), spec.policy_mode);
    case PlannerKind::Random: return std::make_unique<RandomPlanner>();
    case PlannerKind::Greedy: return std::make_unique<GreedyPlanner>(spec.ucb_weight);
    case PlannerKind::Mcts: return std::make_unique<MctsPlanner>(spec);
    case PlannerKind::RigTree: return std::make_unique<RigTreePlanner>(spec);
  }
  throw PreconditionError("unknown planner kind");
}

}  // namespace mripp
