#include "mripp/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mripp {

namespace {

using nlohmann::json;

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

template <typename T>
T scalar(const YAML::Node& n, const std::string& path, const char* type) {
  if (!n.IsScalar()) throw ConfigError(path, line_of(n), std::string("expected ") + type);
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(path, line_of(n), std::string("expected ") + type + ", got '" + n.Scalar() + "'");
  }
}

double as_real(const YAML::Node& n, const std::string& path) {
  const double v = scalar<double>(n, path, "a number");
  if (!std::isfinite(v)) throw ConfigError(path, line_of(n), "must be finite");
  return v;
}

double as_range(const YAML::Node& n, const std::string& path) {
  if (n.IsScalar() && (n.Scalar() == "inf" || n.Scalar() == ".inf" || n.Scalar() == "infinity"))
    return kUnlimitedRange;
  return as_real(n, path);
}

int as_int(const YAML::Node& n, const std::string& path) { return scalar<int>(n, path, "an integer"); }
long as_long(const YAML::Node& n, const std::string& path) { return scalar<long>(n, path, "an integer"); }
std::uint64_t as_u64(const YAML::Node& n, const std::string& path) {
  return scalar<std::uint64_t>(n, path, "a non-negative integer");
}
bool as_bool(const YAML::Node& n, const std::string& path) { return scalar<bool>(n, path, "true or false"); }
std::string as_string(const YAML::Node& n, const std::string& path) { return scalar<std::string>(n, path, "a string"); }

template <typename F>
auto as_list(const YAML::Node& n, const std::string& path, F item) {
  if (!n.IsSequence()) throw ConfigError(path, line_of(n), "expected a list");
  std::vector<decltype(item(n, path))> out;
  for (std::size_t k = 0; k < n.size(); ++k) out.push_back(item(n[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

std::pair<double, double> as_interval(const YAML::Node& n, const std::string& path) {
  const auto v = as_list(n, path, as_real);
  if (v.size() != 2) throw ConfigError(path, line_of(n), "expected [low, high]");
  if (v[0] > v[1]) throw ConfigError(path, line_of(n), "low must not exceed high");
  return {v[0], v[1]};
}

using Handler = std::function<void(const YAML::Node&, const std::string&)>;

/// Dispatches each key of a mapping to its handler; unknown keys fail.
void walk(const YAML::Node& n, const std::string& path, const std::map<std::string, Handler>& fields) {
  if (!n.IsMap()) throw ConfigError(path, line_of(n), "expected a mapping");
  for (const auto& kv : n) {
    const std::string key = kv.first.Scalar();
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError(join(path, key), line_of(kv.first), "unknown key");
    try {
      it->second(kv.second, join(path, key));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(join(path, key), line_of(kv.second), e.what());
    }
  }
}

ViewDirection direction_from_name(const std::string& s, const YAML::Node& n, const std::string& path) {
  if (s == "east") return ViewDirection::East;
  if (s == "north") return ViewDirection::North;
  if (s == "west") return ViewDirection::West;
  if (s == "south") return ViewDirection::South;
  throw ConfigError(path, line_of(n), "expected east, north, west or south");
}

void read_world(const YAML::Node& n, const std::string& path, WorldConfig& w) {
  walk(n, path,
       {{"seed", [&](auto& v, auto& p) { w.seed = as_u64(v, p); }},
        {"grid_resolution", [&](auto& v, auto& p) { w.grid_resolution = as_int(v, p); }},
        {"building_count", [&](auto& v, auto& p) { w.building_count = as_int(v, p); }},
        {"placement", [&](auto& v, auto& p) { w.placement = placement_from_string(as_string(v, p)); }},
        {"windows",
         [&](auto& v, auto& p) {
           const auto r = as_list(v, p, as_int);
           if (r.size() != 2) throw ConfigError(p, line_of(v), "expected [low, high]");
           w.window_min = r[0];
           w.window_max = r[1];
         }},
        {"sensor_fov_deg", [&](auto& v, auto& p) { w.sensor_fov_deg = as_real(v, p); }},
        {"sensor_range", [&](auto& v, auto& p) { w.sensor_range = as_real(v, p); }},
        {"world_scale", [&](auto& v, auto& p) { w.world_scale = as_real(v, p); }},
        {"building_footprint", [&](auto& v, auto& p) { w.building_footprint = as_real(v, p); }},
        {"building_height",
         [&](auto& v, auto& p) {
           const auto r = as_interval(v, p);
           w.building_height_min = r.first;
           w.building_height_max = r.second;
         }},
        {"start_clearance", [&](auto& v, auto& p) { w.start_clearance = as_real(v, p); }}});
}

void read_episode(const YAML::Node& n, const std::string& path, EpisodeConfig& e) {
  walk(n, path,
       {{"robots", [&](auto& v, auto& p) { e.robots = as_int(v, p); }},
        {"total_budget", [&](auto& v, auto& p) { e.total_budget = as_real(v, p); }},
        {"max_steps", [&](auto& v, auto& p) { e.max_steps = as_int(v, p); }},
        {"start",
         [&](auto& v, auto& p) {
           if (!v.IsSequence() || v.size() != 4) throw ConfigError(p, line_of(v), "expected [x, y, z, direction]");
           e.start.position = Vec3(as_real(v[0], p + "[0]"), as_real(v[1], p + "[1]"), as_real(v[2], p + "[2]"));
           e.start.direction = direction_from_name(as_string(v[3], p + "[3]"), v[3], p + "[3]");
         }},
        {"use_comm_gp", [&](auto& v, auto& p) { e.use_comm_gp = as_bool(v, p); }},
        {"seed", [&](auto& v, auto& p) { e.seed = as_u64(v, p); }}});
}

void read_coordination(const YAML::Node& n, const std::string& path, CoordinationParams& c) {
  walk(n, path,
       {{"candidates", [&](auto& v, auto& p) { c.candidates = as_int(v, p); }},
        {"neighborhood", [&](auto& v, auto& p) { c.neighborhood = as_real(v, p); }},
        {"norm",
         [&](auto& v, auto& p) {
           const auto s = as_string(v, p);
           if (s == "infinity")
             c.norm = NeighborhoodNorm::Infinity;
           else if (s == "euclidean")
             c.norm = NeighborhoodNorm::Euclidean;
           else
             throw ConfigError(p, line_of(v), "expected infinity or euclidean");
         }},
        {"collision_distance", [&](auto& v, auto& p) { c.collision_distance = as_real(v, p); }},
        {"comm_range", [&](auto& v, auto& p) { c.comm_range = as_range(v, p); }},
        {"attempts_per_candidate", [&](auto& v, auto& p) { c.attempts_per_candidate = as_int(v, p); }}});
}

void read_gp(const YAML::Node& n, const std::string& path, GpParams& g) {
  walk(n, path,
       {{"position_lengthscale", [&](auto& v, auto& p) { g.position_lengthscale = as_real(v, p); }},
        {"direction_lengthscale", [&](auto& v, auto& p) { g.direction_lengthscale = as_real(v, p); }},
        {"signal_variance", [&](auto& v, auto& p) { g.signal_variance = as_real(v, p); }},
        {"noise_variance", [&](auto& v, auto& p) { g.noise_variance = as_real(v, p); }},
        {"prior_mean", [&](auto& v, auto& p) { g.prior_mean = as_real(v, p); }},
        {"max_points", [&](auto& v, auto& p) { g.max_points = static_cast<std::size_t>(as_u64(v, p)); }}});
}

void read_reward(const YAML::Node& n, const std::string& path, RewardParams& r) {
  walk(n, path,
       {{"alpha", [&](auto& v, auto& p) { r.alpha = as_real(v, p); }},
        {"beta", [&](auto& v, auto& p) { r.beta = as_real(v, p); }},
        {"gamma", [&](auto& v, auto& p) { r.gamma = as_real(v, p); }},
        {"utility_normalizer", [&](auto& v, auto& p) { r.utility_normalizer = as_real(v, p); }}});
}

void read_planner(const YAML::Node& n, const std::string& path, PlannerSpec& s) {
  walk(n, path,
       {{"kind", [&](auto& v, auto& p) { s.kind = planner_kind_from_string(as_string(v, p)); }},
        {"policy_mode",
         [&](auto& v, auto& p) {
           const auto m = as_string(v, p);
           if (m == "greedy")
             s.policy_mode = SelectMode::Greedy;
           else if (m == "sample")
             s.policy_mode = SelectMode::Sample;
           else
             throw ConfigError(p, line_of(v), "expected greedy or sample");
         }},
        {"ucb_weight", [&](auto& v, auto& p) { s.ucb_weight = as_real(v, p); }},
        {"search_weight", [&](auto& v, auto& p) { s.search_weight = as_real(v, p); }},
        {"mcts_iterations", [&](auto& v, auto& p) { s.mcts_iterations = as_int(v, p); }},
        {"mcts_horizon", [&](auto& v, auto& p) { s.mcts_horizon = as_int(v, p); }},
        {"mcts_exploration", [&](auto& v, auto& p) { s.mcts_exploration = as_real(v, p); }},
        {"mcts_children", [&](auto& v, auto& p) { s.mcts_children = as_int(v, p); }},
        {"mcts_discount", [&](auto& v, auto& p) { s.mcts_discount = as_real(v, p); }},
        {"rig_expansions", [&](auto& v, auto& p) { s.rig_expansions = as_int(v, p); }},
        {"rig_extent", [&](auto& v, auto& p) { s.rig_extent = as_real(v, p); }}});
}

void read_model(const YAML::Node& n, const std::string& path, PolicyConfig& m) {
  walk(n, path,
       {{"embed_dim", [&](auto& v, auto& p) { m.embed_dim = as_int(v, p); }},
        {"encoder_layers", [&](auto& v, auto& p) { m.encoder_layers = as_int(v, p); }},
        {"heads", [&](auto& v, auto& p) { m.heads = as_int(v, p); }},
        {"ffn_dim", [&](auto& v, auto& p) { m.ffn_dim = as_int(v, p); }},
        {"state_pool", [&](auto& v, auto& p) { m.state_pool = as_int(v, p); }},
        {"logit_clip", [&](auto& v, auto& p) { m.logit_clip = as_real(v, p); }},
        {"init_seed", [&](auto& v, auto& p) { m.init_seed = as_u64(v, p); }}});
}

void read_training(const YAML::Node& n, const std::string& path, ExperimentConfig& c) {
  TrainConfig& t = c.training;
  walk(n, path,
       {{"robots", [&](auto& v, auto& p) { c.training_robots = as_int(v, p); }},
        {"seed", [&](auto& v, auto& p) { c.training_seed = as_u64(v, p); }},
        {"parallel_envs", [&](auto& v, auto& p) { t.parallel_envs = as_int(v, p); }},
        {"epochs", [&](auto& v, auto& p) { t.epochs = as_int(v, p); }},
        {"batch_size", [&](auto& v, auto& p) { t.batch_size = as_int(v, p); }},
        {"learning_rate", [&](auto& v, auto& p) { t.learning_rate = as_real(v, p); }},
        {"lr_decay", [&](auto& v, auto& p) { t.lr_decay = as_real(v, p); }},
        {"decay_every", [&](auto& v, auto& p) { t.decay_every = as_int(v, p); }},
        {"clip_eps", [&](auto& v, auto& p) { t.clip_eps = as_real(v, p); }},
        {"discount", [&](auto& v, auto& p) { t.discount = as_real(v, p); }},
        {"gae_lambda", [&](auto& v, auto& p) { t.gae_lambda = as_real(v, p); }},
        {"value_coef", [&](auto& v, auto& p) { t.value_coef = as_real(v, p); }},
        {"entropy_coef", [&](auto& v, auto& p) { t.entropy_coef = as_real(v, p); }},
        {"max_grad_norm", [&](auto& v, auto& p) { t.max_grad_norm = as_real(v, p); }},
        {"total_interactions", [&](auto& v, auto& p) { t.total_interactions = as_long(v, p); }},
        {"budget",
         [&](auto& v, auto& p) {
           const auto r = as_interval(v, p);
           t.budget_min = r.first;
           t.budget_max = r.second;
         }},
        {"threads", [&](auto& v, auto& p) { t.threads = as_int(v, p); }},
        {"checkpoint_every", [&](auto& v, auto& p) { t.checkpoint_every = as_int(v, p); }}});
}

void read_evaluation(const YAML::Node& n, const std::string& path, EvaluationConfig& e) {
  walk(n, path,
       {{"environments", [&](auto& v, auto& p) { e.environments = as_int(v, p); }},
        {"trials_per_environment", [&](auto& v, auto& p) { e.trials_per_environment = as_int(v, p); }},
        {"placement", [&](auto& v, auto& p) { e.placement = placement_from_string(as_string(v, p)); }},
        {"seed", [&](auto& v, auto& p) { e.seed = as_u64(v, p); }},
        {"planners",
         [&](auto& v, auto& p) {
           e.planners = as_list(v, p, [](const YAML::Node& x, const std::string& q) {
             return planner_kind_from_string(as_string(x, q));
           });
         }},
        {"baseline_comm_range", [&](auto& v, auto& p) { e.baseline_comm_range = as_range(v, p); }},
        {"threads", [&](auto& v, auto& p) { e.threads = as_int(v, p); }}});
}

void read_scale(const YAML::Node& n, const std::string& path, ScaleConfig& s) {
  walk(n, path,
       {{"robots", [&](auto& v, auto& p) { s.robots = as_list(v, p, as_int); }},
        {"world_scales", [&](auto& v, auto& p) { s.world_scales = as_list(v, p, as_real); }},
        {"trials", [&](auto& v, auto& p) { s.trials = as_int(v, p); }},
        {"budget_per_robot", [&](auto& v, auto& p) { s.budget_per_robot = as_real(v, p); }},
        {"seed", [&](auto& v, auto& p) { s.seed = as_u64(v, p); }},
        {"threads", [&](auto& v, auto& p) { s.threads = as_int(v, p); }}});
}

/// Runs a validator and rewrites its error as a ConfigError on path.
template <typename F>
void check(const std::string& path, int line, F f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path, line, e.what());
  }
}

json canonical_range(double r) { return std::isinf(r) ? json("inf") : json(r); }

}  // namespace

void ExperimentConfig::validate() const {
  check("world", 0, [&] { episode.world.validate(); });
  check("coordination", 0, [&] { episode.coordination.validate(); });
  check("episode", 0, [&] { episode.validate(); });
  check("planner", 0, [&] { planner.validate(); });
  check("model", 0, [&] { model.validate(); });
  check("training", 0, [&] { training.validate(); });
  if (training_robots < 1) throw ConfigError("training.robots", 0, "must be >= 1");
  if (evaluation.environments < 1) throw ConfigError("evaluation.environments", 0, "must be >= 1");
  if (evaluation.trials_per_environment < 1) throw ConfigError("evaluation.trials_per_environment", 0, "must be >= 1");
  if (evaluation.planners.empty()) throw ConfigError("evaluation.planners", 0, "must not be empty");
  if (!(evaluation.baseline_comm_range > episode.coordination.collision_distance))
    throw ConfigError("evaluation.baseline_comm_range", 0, "must exceed coordination.collision_distance");
  if (evaluation.threads < 0 || scale.threads < 0) throw ConfigError("threads", 0, "must be >= 0");
  if (scale.trials < 1) throw ConfigError("scale.trials", 0, "must be >= 1");
  for (int r : scale.robots)
    if (r < 1) throw ConfigError("scale.robots", 0, "robot counts must be >= 1");
  for (double s : scale.world_scales)
    if (!(s >= 1.0)) throw ConfigError("scale.world_scales", 0, "scales must be >= 1");
  if (scale.budget_per_robot < 0.0) throw ConfigError("scale.budget_per_robot", 0, "must be >= 0");
}

ExperimentConfig profile_defaults(const std::string& profile) {
  ExperimentConfig c;
  c.profile = profile;
  c.episode.robots = 3;
  c.episode.total_budget = 10.0;
  c.episode.max_steps = 256;
  c.episode.coordination.comm_range = 0.3;
  c.planner.kind = PlannerKind::Policy;
  c.planner.policy_mode = SelectMode::Greedy;
  if (profile == "paper") {
    return c;
  }
  if (profile == "tiny") {
    WorldConfig& w = c.episode.world;
    w.grid_resolution = 20;
    w.building_count = 9;
    w.building_footprint = 0.15;
    w.window_min = 60;
    w.window_max = 80;
    c.episode.coordination.candidates = 20;
    c.model.embed_dim = 32;
    c.model.encoder_layers = 2;
    c.model.heads = 4;
    c.training_robots = 2;
    c.training.parallel_envs = 8;
    c.training.epochs = 4;
    c.training.batch_size = 256;
    c.training.learning_rate = 1e-3;
    c.training.total_interactions = 40000;
    c.planner.mcts_iterations = 100;
    c.planner.rig_expansions = 150;
    c.evaluation.environments = 10;
    c.evaluation.trials_per_environment = 5;
    c.scale.robots = {16, 32};
    c.scale.world_scales = {3.0};
    c.scale.trials = 20;
    return c;
  }
  throw ConfigError("profile", 0, "unknown profile '" + profile + "' (expected tiny or paper)");
}

ExperimentConfig parse_experiment_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("", e.mark.line + 1, e.msg);
  }
  if (root.IsNull()) return profile_defaults("paper");
  if (!root.IsMap()) throw ConfigError("", line_of(root), "top level must be a mapping");

  std::string profile = "paper";
  if (const YAML::Node p = root["profile"]) profile = as_string(p, "profile");
  ExperimentConfig c;
  try {
    c = profile_defaults(profile);
  } catch (const ConfigError& e) {
    throw ConfigError("profile", line_of(root["profile"]), "unknown profile '" + profile + "'");
  }

  walk(root, "",
       {{"profile", [](auto&, auto&) {}},
        {"world", [&](auto& v, auto& p) { read_world(v, p, c.episode.world); }},
        {"episode", [&](auto& v, auto& p) { read_episode(v, p, c.episode); }},
        {"coordination", [&](auto& v, auto& p) { read_coordination(v, p, c.episode.coordination); }},
        {"gp", [&](auto& v, auto& p) { read_gp(v, p, c.episode.gp); }},
        {"reward", [&](auto& v, auto& p) { read_reward(v, p, c.episode.reward); }},
        {"planner", [&](auto& v, auto& p) { read_planner(v, p, c.planner); }},
        {"model", [&](auto& v, auto& p) { read_model(v, p, c.model); }},
        {"training", [&](auto& v, auto& p) { read_training(v, p, c); }},
        {"evaluation", [&](auto& v, auto& p) { read_evaluation(v, p, c.evaluation); }},
        {"scale", [&](auto& v, auto& p) { read_scale(v, p, c.scale); }}});
  c.episode.planners = {c.planner};

  // Cross-field checks report the line of the offending entry when present.
  auto line_at = [&](std::initializer_list<const char*> keys) {
    YAML::Node n = YAML::Clone(root);
    for (const char* k : keys) {
      if (!n.IsMap() || !n[k]) return 0;
      n = n[k];
    }
    return line_of(n);
  };
  const auto& co = c.episode.coordination;
  if (!(co.collision_distance < co.comm_range))
    throw ConfigError("coordination.collision_distance", line_at({"coordination", "collision_distance"}),
                      "must be smaller than coordination.comm_range");
  if (c.episode.robots < 1) throw ConfigError("episode.robots", line_at({"episode", "robots"}), "must be >= 1");
  if (!(c.episode.total_budget > 0.0))
    throw ConfigError("episode.total_budget", line_at({"episode", "total_budget"}), "must be > 0");
  if (c.episode.world.window_min < 1 || c.episode.world.window_min > c.episode.world.window_max)
    throw ConfigError("world.windows", line_at({"world", "windows"}), "need 0 < low <= high");
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

nlohmann::json to_json(const ExperimentConfig& c) {
  json training = to_json(c.training);
  training.erase("threads");
  json planners = json::array();
  for (PlannerKind k : c.evaluation.planners) planners.push_back(to_string(k));
  return {{"profile", c.profile},
          {"episode", to_json(c.episode)},
          {"planner", to_json(c.planner)},
          {"model", to_json(c.model)},
          {"training", training},
          {"training_robots", c.training_robots},
          {"training_seed", c.training_seed},
          {"evaluation",
           {{"environments", c.evaluation.environments},
            {"trials_per_environment", c.evaluation.trials_per_environment},
            {"placement", to_string(c.evaluation.placement)},
            {"seed", c.evaluation.seed},
            {"planners", planners},
            {"baseline_comm_range", canonical_range(c.evaluation.baseline_comm_range)}}},
          {"scale",
           {{"robots", c.scale.robots},
            {"world_scales", c.scale.world_scales},
            {"trials", c.scale.trials},
            {"budget_per_robot", c.scale.budget_per_robot},
            {"seed", c.scale.seed}}}};
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json(c).dump() + "|" + kCodeVersion)));
  return buf;
}

EpisodeConfig training_episode_config(const ExperimentConfig& c) {
  EpisodeConfig e = c.episode;
  e.robots = c.training_robots;
  e.world.placement = BuildingPlacement::RegularGrid;
  e.world.world_scale = 1.0;
  e.planners = {c.planner};
  e.planners.front().kind = PlannerKind::Policy;
  e.planners.front().policy_mode = SelectMode::Sample;
  return e;
}

}  // namespace mripp
