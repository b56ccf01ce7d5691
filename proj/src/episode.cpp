#include "mripp/episode.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "mripp/errors.hpp"

namespace mripp {

namespace {

using nlohmann::json;

json range_to_json(double r) { return std::isinf(r) ? json("inf") : json(r); }

double range_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kUnlimitedRange;
    throw PreconditionError("comm_range: expected a number or \"inf\"");
  }
  return j.get<double>();
}

json action_to_json(const Action& a) {
  return json::array({a.x(), a.y(), a.z(), static_cast<int>(a.direction)});
}

Action action_from_json(const json& j) {
  return Action{Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()),
                direction_from_index(j.at(3).get<int>())};
}

}  // namespace

nlohmann::json to_json(const CoordinationParams& c) {
  return {{"candidates", c.candidates},
          {"neighborhood", c.neighborhood},
          {"norm", c.norm == NeighborhoodNorm::Infinity ? "infinity" : "euclidean"},
          {"collision_distance", c.collision_distance},
          {"comm_range", range_to_json(c.comm_range)},
          {"attempts_per_candidate", c.attempts_per_candidate}};
}

CoordinationParams coordination_params_from_json(const nlohmann::json& j) {
  CoordinationParams c;
  c.candidates = j.at("candidates").get<int>();
  c.neighborhood = j.at("neighborhood").get<double>();
  const auto norm = j.at("norm").get<std::string>();
  if (norm == "infinity")
    c.norm = NeighborhoodNorm::Infinity;
  else if (norm == "euclidean")
    c.norm = NeighborhoodNorm::Euclidean;
  else
    throw PreconditionError("unknown neighborhood norm: " + norm);
  c.collision_distance = j.at("collision_distance").get<double>();
  c.comm_range = range_from_json(j.at("comm_range"));
  c.attempts_per_candidate = j.at("attempts_per_candidate").get<int>();
  return c;
}

nlohmann::json to_json(const GpParams& g) {
  return {{"position_lengthscale", g.position_lengthscale}, {"direction_lengthscale", g.direction_lengthscale},
          {"signal_variance", g.signal_variance},           {"noise_variance", g.noise_variance},
          {"prior_mean", g.prior_mean},                     {"max_points", g.max_points}};
}

GpParams gp_params_from_json(const nlohmann::json& j) {
  GpParams g;
  g.position_lengthscale = j.at("position_lengthscale").get<double>();
  g.direction_lengthscale = j.at("direction_lengthscale").get<double>();
  g.signal_variance = j.at("signal_variance").get<double>();
  g.noise_variance = j.at("noise_variance").get<double>();
  g.prior_mean = j.at("prior_mean").get<double>();
  g.max_points = j.at("max_points").get<std::size_t>();
  return g;
}

nlohmann::json to_json(const RewardParams& r) {
  return {{"alpha", r.alpha}, {"beta", r.beta}, {"gamma", r.gamma}, {"utility_normalizer", r.utility_normalizer}};
}

RewardParams reward_params_from_json(const nlohmann::json& j) {
  RewardParams r;
  r.alpha = j.at("alpha").get<double>();
  r.beta = j.at("beta").get<double>();
  r.gamma = j.at("gamma").get<double>();
  r.utility_normalizer = j.at("utility_normalizer").get<double>();
  return r;
}

void EpisodeConfig::validate() const {
  if (robots < 1) throw PreconditionError("robots (N) must be >= 1");
  if (!(total_budget >= 0.0) || !std::isfinite(total_budget)) throw PreconditionError("total_budget must be >= 0");
  if (max_steps < 1) throw PreconditionError("max_steps must be >= 1");
  if (planners.empty()) throw PreconditionError("at least one planner spec is required");
  if (planners.size() != 1 && static_cast<int>(planners.size()) != robots)
    throw PreconditionError("planner specs must be 1 or one per robot");
  if (!(reward.utility_normalizer > 0.0)) throw PreconditionError("utility_normalizer must be > 0");
  world.validate();
  coordination.validate();
  for (const auto& p : planners) p.validate();
}

const PlannerSpec& EpisodeConfig::planner_for(int robot) const {
  return planners.size() == 1 ? planners.front() : planners.at(static_cast<std::size_t>(robot));
}

nlohmann::json to_json(const EpisodeConfig& c) {
  json planners = json::array();
  for (const auto& p : c.planners) planners.push_back(to_json(p));
  return {{"robots", c.robots},
          {"total_budget", c.total_budget},
          {"max_steps", c.max_steps},
          {"start", action_to_json(c.start)},
          {"world", to_json(c.world)},
          {"coordination", to_json(c.coordination)},
          {"gp", to_json(c.gp)},
          {"reward", to_json(c.reward)},
          {"use_comm_gp", c.use_comm_gp},
          {"compute_rewards", c.compute_rewards},
          {"planners", planners},
          {"seed", c.seed}};
}

EpisodeConfig episode_config_from_json(const nlohmann::json& j) {
  EpisodeConfig c;
  c.robots = j.at("robots").get<int>();
  c.total_budget = j.at("total_budget").get<double>();
  c.max_steps = j.at("max_steps").get<int>();
  c.start = action_from_json(j.at("start"));
  c.world = world_config_from_json(j.at("world"));
  c.coordination = coordination_params_from_json(j.at("coordination"));
  c.gp = gp_params_from_json(j.at("gp"));
  c.reward = reward_params_from_json(j.at("reward"));
  c.use_comm_gp = j.at("use_comm_gp").get<bool>();
  c.compute_rewards = j.at("compute_rewards").get<bool>();
  c.planners.clear();
  for (const auto& p : j.at("planners")) c.planners.push_back(planner_spec_from_json(p));
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

double RobotState::path_length() const {
  double total = 0.0;
  for (std::size_t k = 1; k < path.size(); ++k) total += distance(path[k - 1], path[k]);
  return total;
}

nlohmann::json to_json(const StepRecord& r) {
  return {{"step", r.step},
          {"robot", r.robot},
          {"event", r.event},
          {"pose", action_to_json(r.pose)},
          {"action", r.action},
          {"candidates", r.candidates},
          {"zeta", r.zeta},
          {"reward",
           {{"r_e", r.reward.r_e}, {"r_u", r.reward.r_u}, {"r_c", r.reward.r_c}, {"total", r.reward.total}}},
          {"budget", r.budget},
          {"comm", r.comm},
          {"pct_targets", r.pct_targets}};
}

std::vector<std::vector<int>> communicate(std::vector<RobotState>& robots, double range, bool update_gp) {
  const std::size_t n = robots.size();
  std::vector<std::vector<int>> contacts(n);
  std::vector<std::vector<Vec3>> fresh(n);
  // Positions are fixed before any exchange so the outcome is order-free.
  std::vector<Vec3> pos(n);
  std::vector<std::size_t> lengths(n);
  for (std::size_t i = 0; i < n; ++i) {
    pos[i] = robots[i].pose().position;
    lengths[i] = robots[i].path.size();
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || (pos[i] - pos[j]).norm() > range) continue;
      RobotState& me = robots[i];
      const RobotState& peer = robots[j];
      contacts[i].push_back(static_cast<int>(j));
      me.peer_positions[j] = pos[j];
      for (std::size_t k = me.known_peer_waypoints[j]; k < lengths[j]; ++k) fresh[i].push_back(peer.path[k].position);
      me.known_peer_waypoints[j] = lengths[j];
    }
  }
  if (update_gp) {
    for (std::size_t i = 0; i < n; ++i) {
      if (fresh[i].empty()) continue;
      robots[i].comm_gp = robots[i].comm_gp.condition(comm_inputs(fresh[i]),
                                                      Vector::Ones(static_cast<Eigen::Index>(fresh[i].size())));
    }
  }
  return contacts;
}

namespace {

bool segment_hits_obstacle(const World& world, const Vec3& from, const Vec3& to) {
  bool hit = false;
  traverse_segment(world.shape, from, to, [&](const Voxel& v, double) {
    if (world.is_occupied(v)) hit = true;
    return !hit;
  });
  return hit;
}

bool segment_known_free(const OccupancyGrid& grid, const Vec3& from, const Vec3& to) {
  bool ok = true;
  traverse_segment(grid.shape(), from, to, [&](const Voxel& v, double) {
    if (grid.state(v) != VoxelState::Free) ok = false;
    return ok;
  });
  return ok;
}

}  // namespace

EpisodeResult run_episode(const World& world, const EpisodeConfig& config, std::shared_ptr<const PolicyNet> policy,
                          const StepObserver& observer, const RewardObserver& reward_observer) {
  config.validate();
  const int n = config.robots;
  const SensorModel sensor = SensorModel::from_world(world.config);
  const double per_robot = config.total_budget / n;
  const double rho = config.coordination.comm_range;

  EpisodeResult result;
  result.total_targets = static_cast<int>(world.targets.size());
  result.per_robot_budget.assign(static_cast<std::size_t>(n), per_robot);

  if (!world.bounds().contains(config.start.position)) throw PreconditionError("start pose lies outside the world");
  if (world.is_occupied(world.shape.voxel_of(config.start.position)))
    throw PreconditionError("start pose lies inside an obstacle");

  std::vector<RobotState> robots;
  std::vector<std::unique_ptr<Planner>> planners;
  std::vector<Rng> sample_rng;
  std::vector<Rng> plan_rng;
  for (int i = 0; i < n; ++i) {
    RobotState r{.id = i,
                 .path = {config.start},
                 .initial_budget = per_robot,
                 .remaining_budget = per_robot,
                 .occupancy = OccupancyGrid(world.shape),
                 .util_gp = make_utility_gp(config.gp),
                 .comm_gp = make_comm_gp(config.gp),
                 .known_peer_waypoints = std::vector<std::size_t>(static_cast<std::size_t>(n), 0),
                 .peer_positions = std::vector<std::optional<Vec3>>(static_cast<std::size_t>(n)),
                 .seen_targets = {},
                 .alive = per_robot > 0.0};
    r.occupancy.observe(world.shape.voxel_of(config.start.position), VoxelState::Free);
    // The start view maps free space; targets seen from it are not credited.
    const SensorObservation first = sense(world, r.occupancy, sensor, config.start);
    r.seen_targets.insert(first.visible_targets.begin(), first.visible_targets.end());
    robots.push_back(std::move(r));
    planners.push_back(make_planner(config.planner_for(i), policy));
    sample_rng.emplace_back(Rng::mix(config.seed, static_cast<std::uint64_t>(i)));
    plan_rng.emplace_back(Rng::mix(config.seed, 1000 + static_cast<std::uint64_t>(i)));
  }
  communicate(robots, rho, config.use_comm_gp);

  TargetRegistry registry;
  GaussianProcess global_gp = make_utility_gp(config.gp);
  std::vector<int> last_decision(static_cast<std::size_t>(n), -1);

  for (int step = 1; step <= config.max_steps; ++step) {
    if (std::none_of(robots.begin(), robots.end(), [](const RobotState& r) { return r.alive; })) break;
    result.steps = step;

    const GaussianProcess global_before = global_gp;
    std::vector<GaussianProcess> comm_before;
    for (const auto& r : robots) comm_before.push_back(r.comm_gp);

    struct Pending {
      std::size_t record;
      int robot;
      Action executed;
      std::vector<Action> probe;
      int zeta;
      int decision;
    };
    std::vector<Pending> moved;
    std::vector<Action> plans_this_step;
    std::vector<int> planned_ids;

    for (int i = 0; i < n; ++i) {
      RobotState& me = robots[static_cast<std::size_t>(i)];
      if (!me.alive) continue;
      StepRecord rec;
      rec.step = step;
      rec.robot = i;
      rec.pose = me.pose();

      // Peers within range are seen at their true current positions.
      RobotView view;
      view.id = i;
      view.grid = &me.occupancy;
      view.util_gp = &me.util_gp;
      view.comm_gp = config.use_comm_gp ? &me.comm_gp : nullptr;
      view.path = me.path;
      view.remaining_budget = me.remaining_budget;
      view.initial_budget = me.initial_budget;
      std::vector<int> in_range;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const Vec3& q = robots[static_cast<std::size_t>(j)].pose().position;
        if ((q - me.pose().position).norm() <= rho) {
          view.peer_positions.push_back(q);
          in_range.push_back(j);
        }
      }
      for (std::size_t k = 0; k < planned_ids.size(); ++k)
        if (std::find(in_range.begin(), in_range.end(), planned_ids[k]) != in_range.end())
          view.peer_plans.push_back(plans_this_step[k]);

      const auto t0 = std::chrono::steady_clock::now();
      std::vector<Action> candidates;
      try {
        candidates = sample_candidates(me.occupancy, me.pose(), view.peer_positions, config.coordination,
                                       sample_rng[static_cast<std::size_t>(i)]);
      } catch (const TrappedError&) {
        Rng probe_rng = sample_rng[static_cast<std::size_t>(i)];
        bool free_alone = true;
        try {
          sample_candidates(me.occupancy, me.pose(), {}, config.coordination, probe_rng);
        } catch (const TrappedError&) {
          free_alone = false;
        }
        rec.event = free_alone ? "wait" : "trapped";
        if (!free_alone) me.alive = false;
      }
      if (candidates.empty()) {
        rec.budget = me.remaining_budget;
        result.records.push_back(rec);
        continue;
      }

      Planner& planner = *planners[static_cast<std::size_t>(i)];
      const std::size_t pool = static_cast<std::size_t>(std::max(1, planner.state_pool()));
      const std::size_t first = me.path.size() > pool ? me.path.size() - pool : 0;
      const std::span<const Action> recent(me.path.data() + first, me.path.size() - first);
      const CoordinationGraph graph = build_graph(std::move(candidates), me.pose(), me.util_gp, view.comm_gp,
                                                  me.remaining_budget, recent);
      rec.candidates = static_cast<int>(graph.size());
      if (!graph.any_unmasked()) {
        rec.event = "depleted";
        rec.budget = me.remaining_budget;
        me.alive = false;
        result.records.push_back(rec);
        continue;
      }

      const PlanningContext ctx{graph, view, config.coordination, plan_rng[static_cast<std::size_t>(i)]};
      const std::size_t index = planner.plan(ctx);
      result.planning_times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      if (index >= graph.size() || graph.budget_mask[index] == 0)
        throw ProtocolError(planner.name() + " planner returned masked or invalid index " + std::to_string(index));

      const Action from = me.pose();
      const Action to = graph.nodes[index];
      const double cost = graph.edge_costs[index];

      // Ground-truth audits.
      if (!segment_known_free(me.occupancy, from.position, to.position) ||
          segment_hits_obstacle(world, from.position, to.position))
        ++result.safety.obstacle_traversals;
      if (me.path_length() + cost > me.initial_budget + 1e-9) ++result.safety.budget_violations;
      for (int j : in_range)
        if ((robots[static_cast<std::size_t>(j)].pose().position - to.position).norm() <=
            config.coordination.collision_distance)
          ++result.safety.proximity_violations;

      me.path.push_back(to);
      me.remaining_budget = std::max(0.0, me.initial_budget - me.path_length());
      const SensorObservation obs = sense(world, me.occupancy, sensor, to);
      int local_new = 0;
      for (int t : obs.visible_targets)
        if (me.seen_targets.insert(t).second) ++local_new;
      me.util_gp = me.util_gp.condition(utility_inputs(std::span<const Action>(&to, 1)),
                                        Vector::Constant(1, local_new / config.reward.utility_normalizer));
      const int z = zeta(obs, registry, i, step);
      result.zeta_sum += z;

      rec.event = "move";
      rec.pose = to;
      rec.action = static_cast<int>(index);
      rec.zeta = z;
      rec.budget = me.remaining_budget;

      int decision = -1;
      if (auto d = planner.last_decision()) {
        result.decisions.push_back(DecisionRecord{i, step, std::move(*d), 0.0, false});
        decision = static_cast<int>(result.decisions.size()) - 1;
        last_decision[static_cast<std::size_t>(i)] = decision;
      }
      moved.push_back(Pending{result.records.size(), i, to, graph.nodes, z, decision});
      plans_this_step.push_back(to);
      planned_ids.push_back(i);
      result.records.push_back(rec);
    }

    const auto contacts = communicate(robots, rho, config.use_comm_gp);

    if (config.compute_rewards && !moved.empty()) {
      std::vector<RobotStepRecord> crit;
      for (const Pending& p : moved) {
        RobotStepRecord r;
        r.robot = p.robot;
        r.executed = p.executed;
        r.probe = p.probe;
        r.new_targets = p.zeta;
        if (config.use_comm_gp) {
          r.comm_before = &comm_before[static_cast<std::size_t>(p.robot)];
          r.comm_after = &robots[static_cast<std::size_t>(p.robot)].comm_gp;
        }
        crit.push_back(std::move(r));
      }
      const auto rewards = step_rewards(global_before, crit, config.reward);
      if (reward_observer) reward_observer(step, global_before, crit, rewards);
      global_gp = merge_step(global_before, crit, config.reward);
      for (std::size_t k = 0; k < moved.size(); ++k) {
        result.records[moved[k].record].reward = rewards[k];
        if (moved[k].decision >= 0) result.decisions[static_cast<std::size_t>(moved[k].decision)].reward = rewards[k].total;
      }
    }

    const double pct = result.total_targets > 0 ? 100.0 * registry.size() / result.total_targets : 0.0;
    for (std::size_t k = result.records.size(); k-- > 0 && result.records[k].step == step;) {
      result.records[k].pct_targets = pct;
      result.records[k].comm = contacts[static_cast<std::size_t>(result.records[k].robot)];
    }
    result.pct_curve.push_back(pct);
    if (observer) observer(step, robots);
  }

  for (int d : last_decision)
    if (d >= 0) result.decisions[static_cast<std::size_t>(d)].done = true;
  result.targets_found = static_cast<int>(registry.size());
  result.pct_targets = result.total_targets > 0 ? 100.0 * result.targets_found / result.total_targets : 0.0;
  return result;
}

std::string trace_to_jsonl(const EpisodeConfig& config, const EpisodeResult& result) {
  std::ostringstream out;
  out << json{{"format", "mripp-trace"}, {"version", kTraceFormatVersion}, {"config", to_json(config)}}.dump() << '\n';
  for (const StepRecord& r : result.records) out << to_json(r).dump() << '\n';
  return out.str();
}

ParsedTrace parse_trace(const std::string& jsonl) {
  std::istringstream in(jsonl);
  std::string line;
  ParsedTrace t;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (!header) {
      if (j.value("format", "") != "mripp-trace") throw PreconditionError("not an episode trace");
      if (j.at("version").get<int>() != kTraceFormatVersion) throw PreconditionError("unsupported trace version");
      t.config = episode_config_from_json(j.at("config"));
      header = true;
      continue;
    }
    t.records.push_back(std::move(j));
  }
  if (!header) throw PreconditionError("empty trace");
  return t;
}

ReplayReport replay_trace(const std::string& jsonl, std::shared_ptr<const PolicyNet> policy) {
  const ParsedTrace trace = parse_trace(jsonl);
  const World world = generate_world(trace.config.world);
  const EpisodeResult rerun = run_episode(world, trace.config, std::move(policy));
  ReplayReport rep;
  const std::size_t n = std::min(trace.records.size(), rerun.records.size());
  for (std::size_t k = 0; k < n; ++k) {
    ++rep.records_compared;
    const json now = to_json(rerun.records[k]);
    if (now != trace.records[k]) {
      rep.mismatch = "record " + std::to_string(k) + ": expected " + trace.records[k].dump() + ", got " + now.dump();
      return rep;
    }
  }
  if (trace.records.size() != rerun.records.size()) {
    rep.mismatch = "record count " + std::to_string(trace.records.size()) + " vs " + std::to_string(rerun.records.size());
    return rep;
  }
  rep.identical = true;
  return rep;
}

}  // namespace mripp
