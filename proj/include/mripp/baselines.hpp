#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "mripp/planner.hpp"

namespace mripp {

/// Uniform choice over unmasked nodes.
std::size_t random_planner(const CoordinationGraph& graph, Rng& rng);

/// Scores u_util + w * sqrt(P_util) of every node.
std::vector<double> ucb_scores(const CoordinationGraph& graph, double weight);
/// Argmax of ucb_scores over unmasked nodes, lowest index on ties.
std::size_t greedy_gp_planner(const CoordinationGraph& graph, double weight);

/// Generic UCT search. The model expands a state into children with their
/// immediate rewards and estimates the value of a leaf by a rollout.
template <class State>
struct SearchModel {
  struct Edge {
    State state;
    double reward = 0.0;
  };
  std::function<std::vector<Edge>(const State&, int depth)> expand;
  std::function<double(const State&, int depth, Rng&)> rollout;
};

struct MctsParams {
  int iterations = 200;
  int horizon = 8;
  double exploration = 1.4142135623730951;
  double discount = 0.9;
};

struct MctsResult {
  std::size_t best_child = 0;
  std::vector<int> child_visits;
  std::vector<double> child_values;
};

template <class State>
MctsResult run_mcts(const State& root, const SearchModel<State>& model, const MctsParams& params, Rng& rng);

/// UCT over the robot's coordination graph with a GP surrogate reward.
/// Later robots condition the surrogate on earlier robots' planned
/// waypoints. Falls back to greedy_gp_planner when iterations == 0.
std::size_t mcts_planner(const PlanningContext& ctx, const PlannerSpec& spec);

/// Rapidly-exploring information-gathering tree.
struct RigNode {
  Action pose;
  int parent = -1;
  double cost = 0.0;
  double info = 0.0;
};

struct RigTree {
  std::vector<RigNode> nodes;

  /// Node maximising accumulated info per unit cost (root excluded, lowest
  /// index on ties); nullopt for a root-only tree.
  std::optional<std::size_t> best_node() const;
  /// The child of the root on the branch leading to node.
  std::size_t first_edge(std::size_t node) const;
};

/// Grows the tree from the current pose within the known-free space.
RigTree grow_rig_tree(const PlanningContext& ctx, const PlannerSpec& spec);

/// Index of the unmasked node nearest to the first edge of the best branch;
/// nullopt when the tree could not be extended.
std::optional<std::size_t> rig_tree_planner(const PlanningContext& ctx, const PlannerSpec& spec);

/// Surrogate used by the search baselines: the robot's utility GP,
/// conditioned on peers' planned waypoints as already harvested.
GaussianProcess surrogate_gp(const RobotView& view);

// ------------------------------------------------------------------ impl

template <class State>
MctsResult run_mcts(const State& root, const SearchModel<State>& model, const MctsParams& params, Rng& rng) {
  struct Node {
    State state;
    int parent = -1;
    int depth = 0;
    double reward = 0.0;
    int visits = 0;
    double value = 0.0;
    bool expanded = false;
    std::vector<int> children;
  };
  std::vector<Node> tree;
  tree.push_back(Node{root, -1, 0, 0.0, 0, 0.0, false, {}});

  auto expand = [&](int id) {
    tree[id].expanded = true;
    if (tree[id].depth >= params.horizon) return;
    auto edges = model.expand(tree[id].state, tree[id].depth);
    for (auto& e : edges) {
      tree.push_back(Node{std::move(e.state), id, tree[id].depth + 1, e.reward, 0, 0.0, false, {}});
      tree[id].children.push_back(static_cast<int>(tree.size()) - 1);
    }
  };

  expand(0);
  for (int it = 0; it < params.iterations && !tree[0].children.empty(); ++it) {
    int node = 0;
    while (true) {
      if (!tree[node].expanded) expand(node);
      const auto& kids = tree[node].children;
      if (kids.empty()) break;
      int pick = -1;
      double best = -std::numeric_limits<double>::infinity();
      for (int c : kids) {
        if (tree[c].visits == 0) {
          pick = c;
          break;
        }
        const double score = tree[c].value / tree[c].visits +
                             params.exploration * std::sqrt(std::log(static_cast<double>(tree[node].visits)) / tree[c].visits);
        if (score > best) {
          best = score;
          pick = c;
        }
      }
      node = pick;
      if (tree[node].visits == 0) break;
    }
    double g = tree[node].depth < params.horizon ? model.rollout(tree[node].state, tree[node].depth, rng) : 0.0;
    for (int n = node; n != 0; n = tree[n].parent) {
      g = tree[n].reward + params.discount * g;
      tree[n].visits += 1;
      tree[n].value += g;
    }
    tree[0].visits += 1;
  }

  MctsResult result;
  for (int c : tree[0].children) {
    result.child_visits.push_back(tree[c].visits);
    result.child_values.push_back(tree[c].visits > 0 ? tree[c].value / tree[c].visits : 0.0);
  }
  for (std::size_t i = 1; i < result.child_visits.size(); ++i)
    if (result.child_visits[i] > result.child_visits[result.best_child]) result.best_child = i;
  return result;
}

}  // namespace mripp
