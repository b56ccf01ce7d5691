#include "mripp/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "mripp/errors.hpp"

namespace mripp {

namespace {

std::vector<std::size_t> unmasked(const CoordinationGraph& graph) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < graph.size(); ++i)
    if (graph.budget_mask[i]) idx.push_back(i);
  if (idx.empty()) throw PreconditionError("planner called with every candidate masked");
  return idx;
}

std::vector<double> gp_scores(const GaussianProcess& gp, std::span<const Action> actions, double weight) {
  const PosteriorDiag p = gp.posterior_diag(utility_inputs(actions));
  std::vector<double> s(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i)
    s[i] = p.mean[static_cast<Eigen::Index>(i)] + weight * std::sqrt(p.variance[static_cast<Eigen::Index>(i)]);
  return s;
}

}  // namespace

std::size_t random_planner(const CoordinationGraph& graph, Rng& rng) {
  const auto idx = unmasked(graph);
  return idx[rng.below(idx.size())];
}

std::vector<double> ucb_scores(const CoordinationGraph& graph, double weight) {
  std::vector<double> s(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    s[i] = graph.features(r, 5) + weight * std::sqrt(std::max(0.0, graph.features(r, 6)));
  }
  return s;
}

std::size_t greedy_gp_planner(const CoordinationGraph& graph, double weight) {
  const auto idx = unmasked(graph);
  const auto s = ucb_scores(graph, weight);
  std::size_t best = idx.front();
  for (std::size_t i : idx)
    if (s[i] > s[best]) best = i;
  return best;
}

GaussianProcess surrogate_gp(const RobotView& view) {
  if (view.util_gp == nullptr) throw PreconditionError("robot view has no utility GP");
  if (view.peer_plans.empty()) return *view.util_gp;
  return view.util_gp->condition(utility_inputs(view.peer_plans),
                                 Vector::Constant(static_cast<Eigen::Index>(view.peer_plans.size()), 0.0));
}

namespace {

struct PathState {
  Action pose;
  double budget = 0.0;
  // Graph index for root children, -1 below.
  int graph_index = -1;
};

}  // namespace

std::size_t mcts_planner(const PlanningContext& ctx, const PlannerSpec& spec) {
  const auto idx = unmasked(ctx.graph);
  if (spec.mcts_iterations == 0) return greedy_gp_planner(ctx.graph, spec.ucb_weight);

  const GaussianProcess surrogate = surrogate_gp(ctx.view);
  const OccupancyGrid& grid = *ctx.view.grid;
  CoordinationParams local = ctx.coordination;
  local.candidates = spec.mcts_children;

  SearchModel<PathState> model;
  model.expand = [&](const PathState& s, int depth) {
    std::vector<SearchModel<PathState>::Edge> edges;
    std::vector<Action> actions;
    std::vector<PathState> states;
    if (depth == 0) {
      for (std::size_t i : idx) {
        actions.push_back(ctx.graph.nodes[i]);
        states.push_back({ctx.graph.nodes[i], s.budget - ctx.graph.edge_costs[i], static_cast<int>(i)});
      }
    } else {
      std::vector<Action> sampled;
      try {
        sampled = sample_candidates(grid, s.pose, {}, local, ctx.rng);
      } catch (const TrappedError&) {
        return edges;
      }
      for (const Action& a : sampled) {
        const double cost = distance(s.pose, a);
        if (cost > s.budget) continue;
        actions.push_back(a);
        states.push_back({a, s.budget - cost, -1});
      }
    }
    if (actions.empty()) return edges;
    const auto scores = gp_scores(surrogate, actions, spec.search_weight);
    for (std::size_t k = 0; k < actions.size(); ++k) edges.push_back({states[k], scores[k]});
    return edges;
  };

  CoordinationParams single = ctx.coordination;
  single.candidates = 1;
  single.attempts_per_candidate = 20;
  model.rollout = [&](const PathState& s, int depth, Rng& rng) {
    double g = 0.0;
    double disc = 1.0;
    Action pose = s.pose;
    double budget = s.budget;
    for (int k = depth; k < spec.mcts_horizon; ++k) {
      std::vector<Action> next;
      try {
        next = sample_candidates(grid, pose, {}, single, rng);
      } catch (const TrappedError&) {
        break;
      }
      const double cost = distance(pose, next[0]);
      if (cost > budget) break;
      g += disc * gp_scores(surrogate, next, spec.search_weight)[0];
      disc *= spec.mcts_discount;
      pose = next[0];
      budget -= cost;
    }
    return g;
  };

  MctsParams params{spec.mcts_iterations, spec.mcts_horizon, spec.mcts_exploration, spec.mcts_discount};
  const MctsResult r = run_mcts(PathState{ctx.graph.current, ctx.view.remaining_budget, -1}, model, params, ctx.rng);
  return idx[r.best_child];
}

std::optional<std::size_t> RigTree::best_node() const {
  std::optional<std::size_t> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (!(nodes[i].cost > 0.0)) continue;
    const double s = nodes[i].info / nodes[i].cost;
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

std::size_t RigTree::first_edge(std::size_t node) const {
  std::size_t n = node;
  while (nodes[n].parent > 0) n = static_cast<std::size_t>(nodes[n].parent);
  return n;
}

RigTree grow_rig_tree(const PlanningContext& ctx, const PlannerSpec& spec) {
  const OccupancyGrid& grid = *ctx.view.grid;
  const GaussianProcess surrogate = surrogate_gp(ctx.view);
  const Bounds bounds = grid.shape().bounds();
  const double step = ctx.coordination.neighborhood;
  const double extent = spec.rig_extent * step;
  const Vec3 origin = ctx.graph.current.position;

  RigTree tree;
  tree.nodes.push_back({ctx.graph.current, -1, 0.0, 0.0});
  for (int e = 0; e < spec.rig_expansions; ++e) {
    const Vec3 sample(origin.x() + ctx.rng.uniform(-extent, extent), origin.y() + ctx.rng.uniform(-extent, extent),
                      origin.z() + ctx.rng.uniform(-extent, extent));
    const auto dir = direction_from_index(static_cast<int>(ctx.rng.below(kNumDirections)));
    if (!bounds.contains(sample)) continue;
    std::size_t near = 0;
    double near_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const double d = (tree.nodes[i].pose.position - sample).norm();
      if (d < near_d) {
        near_d = d;
        near = i;
      }
    }
    if (near_d < 1e-9) continue;
    const Vec3 from = tree.nodes[near].pose.position;
    const double len = std::min(near_d, step);
    const Vec3 to = from + (sample - from) / near_d * len;
    if (grid.state_at(to) != VoxelState::Free || !is_reachable(grid, from, to)) continue;
    const double cost = tree.nodes[near].cost + len;
    if (cost > ctx.view.remaining_budget) continue;
    const Action pose{to, dir};
    const std::vector<Action> one{pose};
    const double info = tree.nodes[near].info + gp_scores(surrogate, one, spec.search_weight)[0];
    tree.nodes.push_back({pose, static_cast<int>(near), cost, info});
  }
  return tree;
}

std::optional<std::size_t> rig_tree_planner(const PlanningContext& ctx, const PlannerSpec& spec) {
  const auto idx = unmasked(ctx.graph);
  const RigTree tree = grow_rig_tree(ctx, spec);
  const auto best = tree.best_node();
  if (!best) return std::nullopt;
  const Action& target = tree.nodes[tree.first_edge(*best)].pose;
  std::size_t pick = idx.front();
  double pick_d = std::numeric_limits<double>::infinity();
  bool pick_same_dir = false;
  for (std::size_t i : idx) {
    const double d = (ctx.graph.nodes[i].position - target.position).norm();
    const bool same = ctx.graph.nodes[i].direction == target.direction;
    if (d < pick_d - 1e-12 || (std::abs(d - pick_d) <= 1e-12 && same && !pick_same_dir)) {
      pick = i;
      pick_d = d;
      pick_same_dir = same;
    }
  }
  return pick;
}

}  // namespace mripp
