#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mripp/config.hpp"
#include "mripp/episode.hpp"

namespace mripp {

struct TrialSpec {
  PlannerKind planner = PlannerKind::Random;
  int environment = 0;
  int trial = 0;
  EpisodeConfig episode;
};

struct TrialResult {
  std::string planner;
  int environment = 0;
  int trial = 0;
  std::uint64_t world_seed = 0;
  std::uint64_t episode_seed = 0;
  int robots = 0;
  double world_scale = 1.0;
  double total_budget = 0.0;
  double budget_per_robot = 0.0;
  int targets_found = 0;
  int total_targets = 0;
  double pct_targets = 0.0;
  int steps = 0;
  int budget_violations = 0;
  int obstacle_traversals = 0;
  int proximity_violations = 0;
  std::vector<double> curve;
  std::vector<double> planning_times;

  double mean_planning_time() const;
  double max_planning_time() const;
};

/// Runs every spec on worker threads; results come back in spec order.
std::vector<TrialResult> run_trials(const std::vector<TrialSpec>& specs, std::shared_ptr<const PolicyNet> policy,
                                    int threads);

/// The evaluation matrix: environments x trials for every configured
/// planner, on freshly generated test worlds. Every planner sees the same
/// worlds and episode seeds.
std::vector<TrialSpec> evaluation_specs(const ExperimentConfig& c);

/// The scalability grid over world scales and robot counts (the episode's
/// own robot count is always included as the reference row).
std::vector<TrialSpec> scale_specs(const ExperimentConfig& c, PlannerKind planner);

struct SummaryRow {
  std::string planner;
  int robots = 0;
  double world_scale = 1.0;
  double budget_per_robot = 0.0;
  int trials = 0;
  double mean_pct = 0.0;
  double std_pct = 0.0;
  double mean_targets = 0.0;
  double std_targets = 0.0;
  double mean_planning_time = 0.0;
  int budget_violations = 0;
  int obstacle_traversals = 0;
  int proximity_violations = 0;
};

/// Groups by (planner, robots, world_scale) in first-seen order.
std::vector<SummaryRow> summarize(const std::vector<TrialResult>& results);

/// "# config_hash=... code_version=..." line every output file starts with.
std::string provenance_line(const std::string& hash);

std::string results_csv(const std::string& hash, const std::vector<TrialResult>& results);
std::string summary_csv(const std::string& hash, const std::vector<SummaryRow>& rows);
/// Mean and std of the %-targets curve per planner and step; finished
/// episodes hold their final value.
std::string curves_csv(const std::string& hash, const std::vector<TrialResult>& results);
/// Wall-clock planning times; not expected to be reproducible.
std::string timing_csv(const std::string& hash, const std::vector<TrialResult>& results);

/// Loads a policy from a training checkpoint or a bare policy document.
std::shared_ptr<PolicyNet> load_policy_file(const std::string& path);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& body);

/// Writes results.csv, summary.csv, curves.csv and timing.csv (with the
/// given file prefix) into dir, creating it if needed.
void write_report(const std::string& dir, const std::string& prefix, const std::string& hash,
                  const std::vector<TrialResult>& results);

}  // namespace mripp
