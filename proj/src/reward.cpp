#include "mripp/reward.hpp"

#include <algorithm>

#include "mripp/coordination.hpp"

namespace mripp {

int TargetRegistry::record(std::span<const int> visible, int robot, int step) {
  int fresh = 0;
  for (int id : visible)
    if (found_.emplace(id, Discovery{robot, step}).second) ++fresh;
  return fresh;
}

int zeta(const SensorObservation& observation, TargetRegistry& registry, int robot, int step) {
  return registry.record(observation.visible_targets, robot, step);
}

double exploration_reward(const GaussianProcess& before, const GaussianProcess& after, const Matrix& probe) {
  const double prior = before.trace_of_posterior(probe);
  if (!(prior > 0.0)) return 0.0;
  const double post = after.trace_of_posterior(probe);
  return std::clamp((prior - post) / prior, 0.0, 1.0);
}

RewardBreakdown RewardBreakdown::compose(double r_e, double r_u, double r_c, const RewardParams& p) {
  RewardBreakdown r;
  r.r_e = r_e;
  r.r_u = r_u;
  r.r_c = r_c;
  r.alpha = p.alpha;
  r.beta = p.beta;
  r.gamma = p.gamma;
  r.total = p.alpha * r_e + p.beta * r_u + p.gamma * r_c;
  return r;
}

namespace {

GaussianProcess with_action(const GaussianProcess& gp, const Action& a, double utility) {
  const std::vector<Action> one{a};
  return gp.condition(utility_inputs(one), Vector::Constant(1, utility));
}

}  // namespace

std::vector<RewardBreakdown> step_rewards(const GaussianProcess& global_before, std::span<const RobotStepRecord> records,
                                          const RewardParams& params) {
  std::vector<RewardBreakdown> out;
  out.reserve(records.size());
  for (const RobotStepRecord& rec : records) {
    const double r_u = rec.new_targets / params.utility_normalizer;
    double r_e = 0.0;
    double r_c = 0.0;
    if (!rec.probe.empty()) {
      const GaussianProcess after = with_action(global_before, rec.executed, r_u);
      r_e = exploration_reward(global_before, after, utility_inputs(rec.probe));
      if (rec.comm_before != nullptr && rec.comm_after != nullptr)
        r_c = exploration_reward(*rec.comm_before, *rec.comm_after, comm_inputs(rec.probe));
    }
    out.push_back(RewardBreakdown::compose(r_e, r_u, r_c, params));
  }
  return out;
}

GaussianProcess merge_step(const GaussianProcess& global_before, std::span<const RobotStepRecord> records,
                           const RewardParams& params) {
  if (records.empty()) return global_before;
  std::vector<Action> executed;
  Vector utility(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    executed.push_back(records[i].executed);
    utility[static_cast<Eigen::Index>(i)] = records[i].new_targets / params.utility_normalizer;
  }
  return global_before.condition(utility_inputs(executed), utility);
}

}  // namespace mripp
