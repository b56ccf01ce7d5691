#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mripp/autodiff.hpp"
#include "mripp/coordination.hpp"
#include "mripp/random.hpp"

namespace mripp {

struct PolicyConfig {
  int embed_dim = 128;
  int encoder_layers = 3;
  int heads = 4;
  /// Hidden width of the feed-forward sublayers; 0 means 2 * embed_dim.
  int ffn_dim = 0;
  /// Number of most recent waypoints averaged into the planning state.
  int state_pool = 1;
  /// Pointer logits are squashed to [-logit_clip, logit_clip].
  double logit_clip = 10.0;
  std::uint64_t init_seed = 1;

  int ffn_width() const { return ffn_dim > 0 ? ffn_dim : 2 * embed_dim; }
  void validate() const;
};

nlohmann::json to_json(const PolicyConfig& c);
PolicyConfig policy_config_from_json(const nlohmann::json& j);

inline constexpr int kStateDims = kFeatureCount + 1;

/// What the policy sees for one decision: the graph's feature matrix, its
/// budget mask, and the planning state (pooled path features and the
/// remaining budget fraction).
struct PolicyInput {
  ad::Tensor features;
  ad::Mask mask;
  ad::Tensor state;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
};

PolicyInput make_policy_input(const CoordinationGraph& graph, double budget_fraction);

struct PolicyOutput {
  std::vector<double> probs;
  double value = 0.0;
};

/// Encoder-decoder attention policy. The encoder runs self-attention over
/// candidate embeddings; the decoder attends from the planning state to the
/// unmasked candidates, then scores each candidate with a pointer head.
class PolicyNet {
 public:
  explicit PolicyNet(const PolicyConfig& config);

  const PolicyConfig& config() const { return config_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }

  struct Recorded {
    ad::Var log_probs;
    ad::Var probs;
    ad::Var value;
  };
  /// Records the forward pass on tape with trainable parameter leaves.
  Recorded forward(ad::Tape& tape, const PolicyInput& input);
  /// Inference only: parameters enter the tape as constants.
  PolicyOutput evaluate(const PolicyInput& input) const;

  /// Checkpoint document: model config + parameters.
  nlohmann::json to_json() const;
  static PolicyNet from_json(const nlohmann::json& j);

 private:
  /// Maps a parameter name to its leaf on the current tape.
  using Bind = std::function<ad::Var(const std::string&)>;

  Recorded run(ad::Tape& tape, const PolicyInput& input, const Bind& bind) const;
  ad::Var attention(const Bind& bind, const std::string& prefix, const ad::Var& query, const ad::Var& keys,
                    const ad::Mask& mask) const;
  ad::Var feed_forward(const Bind& bind, const std::string& prefix, const ad::Var& x) const;
  ad::Var norm(const Bind& bind, const std::string& prefix, const ad::Var& x) const;
  ad::Var linear(const Bind& bind, const std::string& prefix, const ad::Var& x, bool bias = true) const;
  void add_linear(const std::string& prefix, int in, int out, bool bias, Rng& rng);
  void add_norm(const std::string& prefix, int width);
  void add_attention(const std::string& prefix, Rng& rng);
  void add_feed_forward(const std::string& prefix, Rng& rng);

  PolicyConfig config_;
  ad::ParameterSet params_;
};

enum class SelectMode { Greedy, Sample };

/// Greedy: argmax with lowest-index tie-break. Sample: categorical draw.
std::size_t select_action(const std::vector<double>& probs, SelectMode mode, Rng* rng = nullptr);

}  // namespace mripp
