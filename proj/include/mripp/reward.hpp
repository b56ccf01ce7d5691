#pragma once

#include <map>
#include <span>
#include <vector>

#include "mripp/geometry.hpp"
#include "mripp/gp.hpp"
#include "mripp/sensor.hpp"

namespace mripp {

struct RewardParams {
  double alpha = 20.0;
  double beta = 0.02;
  double gamma = 1.0;
  /// Target count that maps to r_u = 1.
  double utility_normalizer = 50.0;
};

/// Global record of discovered targets. A target is recorded once, ever,
/// credited to the first robot that saw it.
class TargetRegistry {
 public:
  struct Discovery {
    int robot;
    int step;
  };

  bool contains(int target) const { return found_.count(target) != 0; }
  std::size_t size() const { return found_.size(); }
  const std::map<int, Discovery>& entries() const { return found_; }

  /// Records every unseen id and returns how many were new.
  int record(std::span<const int> visible, int robot, int step);

 private:
  std::map<int, Discovery> found_;
};

/// Number of targets in the observation not yet in the registry; the
/// registry is updated with them.
int zeta(const SensorObservation& observation, TargetRegistry& registry, int robot, int step);

/// Normalised trace reduction (Tr(P-) - Tr(P+)) / Tr(P-) over probe,
/// clamped to [0, 1]; 0 when the prior trace vanishes.
double exploration_reward(const GaussianProcess& before, const GaussianProcess& after, const Matrix& probe);

struct RewardBreakdown {
  double r_e = 0.0;
  double r_u = 0.0;
  double r_c = 0.0;
  double total = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  static RewardBreakdown compose(double r_e, double r_u, double r_c, const RewardParams& p);
};

/// What one robot did during a step, as seen by the centralized critic.
struct RobotStepRecord {
  int robot = 0;
  Action executed;
  /// Probe set: the candidate actions the robot planned over.
  std::vector<Action> probe;
  int new_targets = 0;
  /// Communication GP before and after this step's exchange; null when the
  /// communication GP is disabled.
  const GaussianProcess* comm_before = nullptr;
  const GaussianProcess* comm_after = nullptr;
};

/// Rewards for every robot of one timestep. Each r_e is measured against the
/// same start-of-step global utility GP, so the result does not depend on the
/// order of records.
std::vector<RewardBreakdown> step_rewards(const GaussianProcess& global_before, std::span<const RobotStepRecord> records,
                                          const RewardParams& params);

/// The global utility GP after merging all executed actions of the step.
GaussianProcess merge_step(const GaussianProcess& global_before, std::span<const RobotStepRecord> records,
                           const RewardParams& params);

}  // namespace mripp
