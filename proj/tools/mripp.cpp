// Command-line entry point: generate, train, evaluate, scale, replay.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "mripp/bench.hpp"
#include "mripp/config.hpp"
#include "mripp/episode.hpp"
#include "mripp/errors.hpp"
#include "mripp/ppo.hpp"
#include "mripp/world.hpp"

namespace fs = std::filesystem;
using namespace mripp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> trials;
  std::optional<int> parallel;
  bool no_comm_gp = false;
  std::optional<double> gamma;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment YAML file (default: paper profile)");
  cmd->add_option("--seed", c.seed, "Override the seed of this command");
  cmd->add_option("--out-dir", c.out_dir, "Output directory (env MRIPP_OUT_DIR)");
  cmd->add_option("--trials", c.trials, "Trials per environment (evaluate) or per grid cell (scale)");
  cmd->add_option("--parallel", c.parallel, "Worker threads (env MRIPP_PARALLEL, 0 = all cores)");
  cmd->add_flag("--no-comm-gp", c.no_comm_gp, "Disable the communication GP features and reward");
  cmd->add_option("--gamma", c.gamma, "Communication reward weight");
}

std::string out_dir(const Common& c) {
  if (!c.out_dir.empty()) return c.out_dir;
  if (const char* env = std::getenv("MRIPP_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return "out";
}

int parallel(const Common& c) {
  if (c.parallel) return *c.parallel;
  if (const char* env = std::getenv("MRIPP_PARALLEL"); env != nullptr && *env != '\0') {
    try {
      return std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError("MRIPP_PARALLEL", 0, "expected an integer");
    }
  }
  return 0;
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? profile_defaults("paper") : load_experiment_config(c.config);
  if (c.no_comm_gp) cfg.episode.use_comm_gp = false;
  if (c.gamma) cfg.episode.reward.gamma = *c.gamma;
  const int threads = parallel(c);
  if (threads < 0) throw ConfigError("parallel", 0, "must be >= 0");
  cfg.training.threads = threads;
  cfg.evaluation.threads = threads;
  cfg.scale.threads = threads;
  if (c.trials) {
    if (*c.trials < 1) throw ConfigError("trials", 0, "must be >= 1");
    cfg.evaluation.trials_per_environment = *c.trials;
    cfg.scale.trials = *c.trials;
  }
  cfg.episode.planners = {cfg.planner};
  cfg.validate();
  return cfg;
}

std::shared_ptr<PolicyNet> policy_for(const ExperimentConfig& cfg, const std::string& checkpoint) {
  if (checkpoint.empty()) throw ConfigError("checkpoint", 0, "the policy planner needs --checkpoint");
  auto net = load_policy_file(checkpoint);
  if (to_json(net->config()) != to_json(cfg.model))
    throw ConfigError("model", 0, "checkpoint model " + to_json(net->config()).dump() + " does not match config " +
                                      to_json(cfg.model).dump());
  return net;
}

int cmd_generate(const Common& c, const std::string& out_file) {
  ExperimentConfig cfg = load(c);
  if (c.seed) cfg.episode.world.seed = *c.seed;
  const World world = generate_world(cfg.episode.world);
  const std::string path = out_file.empty() ? (fs::path(out_dir(c)) / "world.json").string() : out_file;
  write_text_file(path, world_to_json(world).dump(1) + "\n");
  std::cout << "world " << path << ": " << world.obstacle_count() << " obstacle voxels, " << world.targets.size()
            << " targets\n";
  return kExitOk;
}

int cmd_train(const Common& c, const std::string& resume) {
  ExperimentConfig cfg = load(c);
  if (c.seed) cfg.training_seed = *c.seed;
  const std::string dir = out_dir(c);
  fs::create_directories(dir);
  const std::string hash = config_hash(cfg);
  const EpisodeConfig episode = training_episode_config(cfg);

  TrainerState state;
  const fs::path csv_path = fs::path(dir) / "training.csv";
  if (!resume.empty()) {
    state = TrainerState::from_json(nlohmann::json::parse(read_text_file(resume)));
    if (to_json(state.net->config()) != to_json(cfg.model))
      throw ConfigError("model", 0, "checkpoint model does not match config");
    std::cout << "resuming at update " << state.updates << ", " << state.interactions << " interactions\n";
  } else {
    state.net = std::make_shared<PolicyNet>(cfg.model);
    state.adam = Adam(state.net->params());
    state.seed = cfg.training_seed;
    write_text_file(csv_path.string(), provenance_line(hash) + training_csv_header() + "\n");
  }
  std::ofstream csv(csv_path, std::ios::app);

  auto save = [&](const TrainerState& s, const std::string& name) {
    write_text_file((fs::path(dir) / name).string(), s.to_json(cfg.training, episode).dump() + "\n");
  };
  try {
    train(state, episode, cfg.training, [&](const TrainingRow& row, const TrainerState& s) {
      csv << training_csv_row(row) << '\n' << std::flush;
      std::cout << "update " << row.update << "  interactions " << row.interactions << "  return " << row.mean_return
                << "  targets " << row.pct_targets << "%\n";
      if (cfg.training.checkpoint_every > 0 && row.update % cfg.training.checkpoint_every == 0)
        save(s, "checkpoint_" + std::to_string(row.update) + ".json");
      save(s, "checkpoint_latest.json");
    });
  } catch (const TrainingAborted& e) {
    write_text_file((fs::path(dir) / "abort_snapshot.json").string(), e.snapshot().dump() + "\n");
    throw;
  }
  save(state, "checkpoint_final.json");
  std::cout << "final checkpoint " << (fs::path(dir) / "checkpoint_final.json").string() << "\n";
  return kExitOk;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint, const std::vector<std::string>& planners,
                 bool traces) {
  ExperimentConfig cfg = load(c);
  if (c.seed) cfg.evaluation.seed = *c.seed;
  if (!planners.empty()) {
    cfg.evaluation.planners.clear();
    for (const auto& p : planners) cfg.evaluation.planners.push_back(planner_kind_from_string(p));
  }
  std::shared_ptr<const PolicyNet> net;
  if (std::find(cfg.evaluation.planners.begin(), cfg.evaluation.planners.end(), PlannerKind::Policy) !=
      cfg.evaluation.planners.end())
    net = policy_for(cfg, checkpoint);
  const std::string hash = config_hash(cfg);
  const auto specs = evaluation_specs(cfg);
  const auto results = run_trials(specs, net, cfg.evaluation.threads);
  const std::string dir = out_dir(c);
  write_report(dir, "", hash, results);
  if (traces) {
    for (const auto& s : specs) {
      const World world = generate_world(s.episode.world);
      const EpisodeResult r = run_episode(world, s.episode, net);
      write_text_file((fs::path(dir) / "traces" /
                       (to_string(s.planner) + "_" + std::to_string(s.environment) + "_" + std::to_string(s.trial) +
                        ".jsonl"))
                          .string(),
                      trace_to_jsonl(s.episode, r));
    }
  }
  std::cout << summary_csv(hash, summarize(results));
  return kExitOk;
}

int cmd_scale(const Common& c, const std::string& checkpoint, const std::string& planner) {
  ExperimentConfig cfg = load(c);
  if (c.seed) cfg.scale.seed = *c.seed;
  const PlannerKind kind = planner_kind_from_string(planner);
  std::shared_ptr<const PolicyNet> net;
  if (kind == PlannerKind::Policy) net = policy_for(cfg, checkpoint);
  const std::string hash = config_hash(cfg);
  const auto results = run_trials(scale_specs(cfg, kind), net, cfg.scale.threads);
  write_report(out_dir(c), "scale_", hash, results);
  std::cout << summary_csv(hash, summarize(results));
  return kExitOk;
}

int cmd_replay(const std::string& trace, const std::string& checkpoint) {
  const std::string text = read_text_file(trace);
  std::shared_ptr<const PolicyNet> net;
  if (!checkpoint.empty()) net = load_policy_file(checkpoint);
  const ReplayReport rep = replay_trace(text, net);
  if (rep.identical) {
    std::cout << "replay identical over " << rep.records_compared << " records\n";
    return kExitOk;
  }
  std::cout << "replay differs: " << rep.mismatch << "\n";
  return kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-robot informative path planning toolkit"};
  app.require_subcommand(1);

  Common gen_opts, train_opts, eval_opts, scale_opts;
  std::string gen_out, resume, eval_ckpt, scale_ckpt, scale_planner = "policy", trace, replay_ckpt;
  std::vector<std::string> eval_planners;
  bool eval_traces = false;

  auto* gen = app.add_subcommand("generate", "Generate a world and write it as JSON");
  add_common(gen, gen_opts);
  gen->add_option("--out", gen_out, "World file (default <out-dir>/world.json)");

  auto* tr = app.add_subcommand("train", "Train the policy with PPO");
  add_common(tr, train_opts);
  tr->add_option("--resume", resume, "Resume from a training checkpoint");

  auto* ev = app.add_subcommand("evaluate", "Run the evaluation matrix");
  add_common(ev, eval_opts);
  ev->add_option("--checkpoint", eval_ckpt, "Policy checkpoint");
  ev->add_option("--planner", eval_planners, "Planners to run (policy, random, greedy, mcts, rig_tree)");
  ev->add_flag("--traces", eval_traces, "Also write one JSONL trace per trial");

  auto* sc = app.add_subcommand("scale", "Sweep robot counts and world scales");
  add_common(sc, scale_opts);
  sc->add_option("--checkpoint", scale_ckpt, "Policy checkpoint");
  sc->add_option("--planner", scale_planner, "Planner to run");

  auto* rp = app.add_subcommand("replay", "Re-run a trace and check it reproduces");
  rp->add_option("--trace", trace, "Trace file")->required();
  rp->add_option("--checkpoint", replay_ckpt, "Policy checkpoint used by the trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(gen_opts, gen_out);
    if (*tr) return cmd_train(train_opts, resume);
    if (*ev) return cmd_evaluate(eval_opts, eval_ckpt, eval_planners, eval_traces);
    if (*sc) return cmd_scale(scale_opts, scale_ckpt, scale_planner);
    if (*rp) return cmd_replay(trace, replay_ckpt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
