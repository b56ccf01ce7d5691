#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mripp/episode.hpp"
#include "mripp/errors.hpp"
#include "mripp/policy.hpp"

namespace mripp {

struct TrainConfig {
  int parallel_envs = 36;
  int epochs = 8;
  int batch_size = 1024;
  double learning_rate = 1e-4;
  double lr_decay = 0.96;
  int decay_every = 512;
  double clip_eps = 0.2;
  double discount = 0.99;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  /// Global gradient-norm clip; 0 disables.
  double max_grad_norm = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Total environment interactions (policy decisions) to train for.
  long total_interactions = 120000;
  /// Per-episode total budget is drawn uniformly from this interval.
  double budget_min = 7.0;
  double budget_max = 9.0;
  /// Rollout worker threads; 0 uses the hardware concurrency.
  int threads = 0;
  /// Write a checkpoint every this many updates; 0 only at the end.
  int checkpoint_every = 10;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// lr * decay^floor(step / decay_every).
double learning_rate_at(const TrainConfig& c, long optimizer_step);

struct Transition {
  int robot = 0;
  PolicyInput input;
  std::size_t index = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
  double advantage = 0.0;
  double ret = 0.0;
};

struct EpisodeSummary {
  std::uint64_t seed = 0;
  double total_budget = 0.0;
  /// Sum of rewards divided by the number of robots.
  double mean_robot_return = 0.0;
  double pct_targets = 0.0;
  int transitions = 0;
};

struct RolloutBuffer {
  std::vector<Transition> transitions;
  std::vector<EpisodeSummary> episodes;
};

/// Fills advantage and ret of one robot's time-ordered transitions.
void compute_gae(std::vector<Transition>& robot_transitions, double discount, double lambda);

/// Turns an episode's decisions into transitions with GAE, robot by robot.
std::vector<Transition> transitions_from_episode(const EpisodeResult& result, double discount, double lambda);

/// Runs one training episode per seed on worker threads. Each episode uses
/// base with its seed, a regenerated world and a sampled total budget.
RolloutBuffer collect_rollouts(std::shared_ptr<const PolicyNet> policy, const EpisodeConfig& base,
                               const TrainConfig& train, const std::vector<std::uint64_t>& seeds);

/// Episode configuration actually used for a training seed.
EpisodeConfig training_episode(const EpisodeConfig& base, const TrainConfig& train, std::uint64_t seed);

class Adam {
 public:
  Adam() = default;
  explicit Adam(const ad::ParameterSet& params);

  /// One step over the gradients currently in params.
  void step(ad::ParameterSet& params, double lr, const TrainConfig& c);
  long steps() const { return t_; }

  nlohmann::json to_json() const;
  static Adam from_json(const nlohmann::json& j);

 private:
  std::map<std::string, ad::Tensor> m_;
  std::map<std::string, ad::Tensor> v_;
  long t_ = 0;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  /// Mean |ratio - 1| over the first minibatch of the first epoch.
  double first_ratio_deviation = 0.0;
  double learning_rate = 0.0;
  int optimizer_steps = 0;
};

/// Raised when a loss turns non-finite; carries the parameters at abort.
class TrainingAborted : public NumericalError {
 public:
  TrainingAborted(const std::string& what, nlohmann::json snapshot)
      : NumericalError(what), snapshot_(std::move(snapshot)) {}
  const nlohmann::json& snapshot() const { return snapshot_; }

 private:
  nlohmann::json snapshot_;
};

struct MinibatchLoss {
  ad::Var loss;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double ratio_deviation = 0.0;
};

/// Clipped-surrogate PPO loss over the given transitions (advantages used
/// as stored; normalize beforehand if desired).
MinibatchLoss ppo_loss(ad::Tape& tape, PolicyNet& net, const std::vector<const Transition*>& batch,
                       const TrainConfig& c);

/// Epochs x minibatches of PPO over buffer. Advantages are normalized per
/// minibatch. rng shuffles the minibatches.
UpdateStats ppo_update(PolicyNet& net, Adam& adam, const std::vector<Transition>& buffer, const TrainConfig& c,
                       Rng& rng);

struct TrainingRow {
  int update = 0;
  long interactions = 0;
  double mean_return = 0.0;
  double pct_targets = 0.0;
  UpdateStats stats;
};

/// Resumable training state.
struct TrainerState {
  std::shared_ptr<PolicyNet> net;
  Adam adam;
  int updates = 0;
  long interactions = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json(const TrainConfig& train, const EpisodeConfig& episode) const;
  static TrainerState from_json(const nlohmann::json& j);
};

inline constexpr int kCheckpointFormatVersion = 1;

std::string training_csv_header();
std::string training_csv_row(const TrainingRow& row);

/// Trains until total_interactions is reached. on_update runs after each
/// update (for logging and checkpoints).
void train(TrainerState& state, const EpisodeConfig& episode, const TrainConfig& train,
           const std::function<void(const TrainingRow&, const TrainerState&)>& on_update);

}  // namespace mripp
