#include "mripp/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "mripp/parallel.hpp"
#include "mripp/stats.hpp"

namespace mripp {

double TrialResult::mean_planning_time() const {
  return mean(std::span<const double>(planning_times.data(), planning_times.size()));
}

double TrialResult::max_planning_time() const {
  return planning_times.empty() ? 0.0 : *std::max_element(planning_times.begin(), planning_times.end());
}

std::vector<TrialResult> run_trials(const std::vector<TrialSpec>& specs, std::shared_ptr<const PolicyNet> policy,
                                    int threads) {
  std::vector<TrialResult> out(specs.size());
  parallel_for(specs.size(), threads, [&](std::size_t k) {
    const TrialSpec& s = specs[k];
    const World world = generate_world(s.episode.world);
    const EpisodeResult r = run_episode(world, s.episode, policy);
    TrialResult& t = out[k];
    t.planner = to_string(s.planner);
    t.environment = s.environment;
    t.trial = s.trial;
    t.world_seed = s.episode.world.seed;
    t.episode_seed = s.episode.seed;
    t.robots = s.episode.robots;
    t.world_scale = s.episode.world.world_scale;
    t.total_budget = s.episode.total_budget;
    t.budget_per_robot = s.episode.total_budget / s.episode.robots;
    t.targets_found = r.targets_found;
    t.total_targets = r.total_targets;
    t.pct_targets = r.pct_targets;
    t.steps = r.steps;
    t.budget_violations = r.safety.budget_violations;
    t.obstacle_traversals = r.safety.obstacle_traversals;
    t.proximity_violations = r.safety.proximity_violations;
    t.curve = r.pct_curve;
    t.planning_times = r.planning_times;
  });
  return out;
}

namespace {

EpisodeConfig eval_episode(const ExperimentConfig& c, PlannerKind kind) {
  EpisodeConfig e = c.episode;
  PlannerSpec spec = c.planner;
  spec.kind = kind;
  if (kind == PlannerKind::Policy) {
    spec.policy_mode = SelectMode::Greedy;
  } else {
    e.coordination.comm_range = c.evaluation.baseline_comm_range;
  }
  e.planners = {spec};
  e.compute_rewards = false;
  return e;
}

}  // namespace

std::vector<TrialSpec> evaluation_specs(const ExperimentConfig& c) {
  std::vector<TrialSpec> specs;
  for (PlannerKind kind : c.evaluation.planners) {
    for (int env = 0; env < c.evaluation.environments; ++env) {
      const std::uint64_t world_seed = Rng::mix(c.evaluation.seed, static_cast<std::uint64_t>(env));
      for (int trial = 0; trial < c.evaluation.trials_per_environment; ++trial) {
        TrialSpec s;
        s.planner = kind;
        s.environment = env;
        s.trial = trial;
        s.episode = eval_episode(c, kind);
        s.episode.world.seed = world_seed;
        s.episode.world.placement = c.evaluation.placement;
        s.episode.seed = Rng::mix(world_seed, 100 + static_cast<std::uint64_t>(trial));
        specs.push_back(std::move(s));
      }
    }
  }
  return specs;
}

std::vector<TrialSpec> scale_specs(const ExperimentConfig& c, PlannerKind planner) {
  std::vector<int> counts{c.episode.robots};
  for (int n : c.scale.robots)
    if (std::find(counts.begin(), counts.end(), n) == counts.end()) counts.push_back(n);
  const double per_robot =
      c.scale.budget_per_robot > 0.0 ? c.scale.budget_per_robot : c.episode.total_budget / c.episode.robots;
  std::vector<TrialSpec> specs;
  for (std::size_t si = 0; si < c.scale.world_scales.size(); ++si) {
    const double scale = c.scale.world_scales[si];
    for (int n : counts) {
      for (int trial = 0; trial < c.scale.trials; ++trial) {
        TrialSpec s;
        s.planner = planner;
        s.environment = static_cast<int>(si);
        s.trial = trial;
        s.episode = eval_episode(c, planner);
        s.episode.robots = n;
        s.episode.total_budget = per_robot * n;
        s.episode.world.world_scale = scale;
        s.episode.world.placement = c.evaluation.placement;
        s.episode.world.seed = Rng::mix(c.scale.seed, si * 100000 + static_cast<std::uint64_t>(trial));
        s.episode.seed = Rng::mix(s.episode.world.seed, 100);
        specs.push_back(std::move(s));
      }
    }
  }
  return specs;
}

std::vector<SummaryRow> summarize(const std::vector<TrialResult>& results) {
  std::vector<SummaryRow> rows;
  std::map<std::tuple<std::string, int, double>, std::vector<const TrialResult*>> groups;
  for (const auto& r : results) {
    auto key = std::make_tuple(r.planner, r.robots, r.world_scale);
    if (groups.find(key) == groups.end()) {
      SummaryRow row;
      row.planner = r.planner;
      row.robots = r.robots;
      row.world_scale = r.world_scale;
      row.budget_per_robot = r.budget_per_robot;
      rows.push_back(row);
    }
    groups[key].push_back(&r);
  }
  for (SummaryRow& row : rows) {
    const auto& g = groups[std::make_tuple(row.planner, row.robots, row.world_scale)];
    std::vector<double> pct;
    std::vector<double> found;
    std::vector<double> times;
    for (const TrialResult* r : g) {
      pct.push_back(r->pct_targets);
      found.push_back(r->targets_found);
      times.insert(times.end(), r->planning_times.begin(), r->planning_times.end());
      row.budget_violations += r->budget_violations;
      row.obstacle_traversals += r->obstacle_traversals;
      row.proximity_violations += r->proximity_violations;
    }
    row.trials = static_cast<int>(g.size());
    row.mean_pct = mean(pct);
    row.std_pct = stddev(pct);
    row.mean_targets = mean(found);
    row.std_targets = stddev(found);
    row.mean_planning_time = mean(times);
  }
  return rows;
}

std::string provenance_line(const std::string& hash) {
  return std::string("# config_hash=") + hash + " code_version=" + kCodeVersion + "\n";
}

namespace {

std::string num(double v) {
  std::ostringstream o;
  o.precision(12);
  o << v;
  return o.str();
}

}  // namespace

std::string results_csv(const std::string& hash, const std::vector<TrialResult>& results) {
  std::ostringstream o;
  o << provenance_line(hash);
  o << "planner,environment,trial,world_seed,episode_seed,robots,world_scale,total_budget,budget_per_robot,"
       "targets_found,total_targets,pct_targets,steps,planning_decisions,budget_violations,obstacle_traversals,"
       "proximity_violations\n";
  for (const auto& r : results) {
    o << r.planner << ',' << r.environment << ',' << r.trial << ',' << r.world_seed << ',' << r.episode_seed << ','
      << r.robots << ',' << num(r.world_scale) << ',' << num(r.total_budget) << ',' << num(r.budget_per_robot) << ','
      << r.targets_found << ',' << r.total_targets << ',' << num(r.pct_targets) << ',' << r.steps << ','
      << r.planning_times.size() << ',' << r.budget_violations << ',' << r.obstacle_traversals << ','
      << r.proximity_violations << '\n';
  }
  return o.str();
}

std::string summary_csv(const std::string& hash, const std::vector<SummaryRow>& rows) {
  std::ostringstream o;
  o << provenance_line(hash);
  o << "planner,robots,world_scale,budget_per_robot,trials,mean_pct_targets,std_pct_targets,mean_targets_found,"
       "std_targets_found,budget_violations,obstacle_traversals,proximity_violations\n";
  for (const auto& r : rows) {
    o << r.planner << ',' << r.robots << ',' << num(r.world_scale) << ',' << num(r.budget_per_robot) << ','
      << r.trials << ',' << num(r.mean_pct) << ',' << num(r.std_pct) << ',' << num(r.mean_targets) << ','
      << num(r.std_targets) << ',' << r.budget_violations << ',' << r.obstacle_traversals << ','
      << r.proximity_violations << '\n';
  }
  return o.str();
}

std::string curves_csv(const std::string& hash, const std::vector<TrialResult>& results) {
  std::ostringstream o;
  o << provenance_line(hash);
  o << "planner,robots,world_scale,step,mean_pct_targets,std_pct_targets\n";
  std::vector<std::tuple<std::string, int, double>> order;
  std::map<std::tuple<std::string, int, double>, std::vector<const TrialResult*>> groups;
  for (const auto& r : results) {
    auto key = std::make_tuple(r.planner, r.robots, r.world_scale);
    if (groups.find(key) == groups.end()) order.push_back(key);
    groups[key].push_back(&r);
  }
  for (const auto& key : order) {
    const auto& g = groups[key];
    std::size_t len = 0;
    for (const TrialResult* r : g) len = std::max(len, r->curve.size());
    for (std::size_t step = 0; step < len; ++step) {
      std::vector<double> v;
      for (const TrialResult* r : g) {
        if (r->curve.empty()) {
          v.push_back(0.0);
        } else {
          v.push_back(r->curve[std::min(step, r->curve.size() - 1)]);
        }
      }
      o << std::get<0>(key) << ',' << std::get<1>(key) << ',' << num(std::get<2>(key)) << ',' << step + 1 << ','
        << num(mean(v)) << ',' << num(stddev(v)) << '\n';
    }
  }
  return o.str();
}

std::string timing_csv(const std::string& hash, const std::vector<TrialResult>& results) {
  std::ostringstream o;
  o << provenance_line(hash);
  o << "planner,environment,trial,robots,world_scale,planning_decisions,mean_planning_time_s,max_planning_time_s\n";
  for (const auto& r : results) {
    o << r.planner << ',' << r.environment << ',' << r.trial << ',' << r.robots << ',' << num(r.world_scale) << ','
      << r.planning_times.size() << ',' << num(r.mean_planning_time()) << ',' << num(r.max_planning_time()) << '\n';
  }
  return o.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& body) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << body;
}

std::shared_ptr<PolicyNet> load_policy_file(const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(read_text_file(path));
  if (j.value("format", "") == "mripp-checkpoint") return std::make_shared<PolicyNet>(PolicyNet::from_json(j.at("policy")));
  return std::make_shared<PolicyNet>(PolicyNet::from_json(j));
}

void write_report(const std::string& dir, const std::string& prefix, const std::string& hash,
                  const std::vector<TrialResult>& results) {
  auto write = [&](const std::string& name, const std::string& body) {
    write_text_file((std::filesystem::path(dir) / (prefix + name)).string(), body);
  };
  write("results.csv", results_csv(hash, results));
  write("summary.csv", summary_csv(hash, summarize(results)));
  write("curves.csv", curves_csv(hash, results));
  write("timing.csv", timing_csv(hash, results));
}

}  // namespace mripp
