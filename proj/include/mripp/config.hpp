#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mripp/episode.hpp"
#include "mripp/planner.hpp"
#include "mripp/policy.hpp"
#include "mripp/ppo.hpp"

namespace mripp {

inline constexpr const char* kCodeVersion = "mripp-1.0.0";

struct EvaluationConfig {
  int environments = 25;
  int trials_per_environment = 10;
  BuildingPlacement placement = BuildingPlacement::Random;
  std::uint64_t seed = 1000;
  /// Planners to compare; "policy" needs a checkpoint.
  std::vector<PlannerKind> planners{PlannerKind::Policy, PlannerKind::Random, PlannerKind::Greedy,
                                    PlannerKind::Mcts, PlannerKind::RigTree};
  /// Communication range for baseline planners (infinity for parity runs).
  double baseline_comm_range = kUnlimitedRange;
  int threads = 0;
};

struct ScaleConfig {
  std::vector<int> robots{16, 32, 48, 64};
  std::vector<double> world_scales{3.0, 8.0, 16.0};
  int trials = 100;
  /// Budget per robot; the total budget is this times N. 0 keeps the
  /// episode's per-robot budget B/N.
  double budget_per_robot = 0.0;
  std::uint64_t seed = 2000;
  int threads = 0;
};

struct ExperimentConfig {
  std::string profile = "paper";
  EpisodeConfig episode;
  PlannerSpec planner;
  PolicyConfig model;
  TrainConfig training;
  /// Robots per training episode.
  int training_robots = 3;
  std::uint64_t training_seed = 0;
  EvaluationConfig evaluation;
  ScaleConfig scale;

  void validate() const;
};

/// Defaults for a named profile: "paper" or "tiny".
ExperimentConfig profile_defaults(const std::string& profile);

/// Parses YAML text. The optional top-level "profile" key picks the base
/// defaults; every other key overrides them. Throws ConfigError with the
/// field path and line on unknown keys, wrong types or failed checks.
ExperimentConfig parse_experiment_config(const std::string& yaml_text);
ExperimentConfig load_experiment_config(const std::string& path);

/// Canonical JSON of the resolved configuration (sorted keys).
nlohmann::json to_json(const ExperimentConfig& c);
/// 16 hex digits of FNV-1a 64 over the canonical JSON plus code version.
std::string config_hash(const ExperimentConfig& c);

/// Episode configuration used for training: training robot count and the
/// profile's world, regular building placement.
EpisodeConfig training_episode_config(const ExperimentConfig& c);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace mripp
