#include "mripp/policy.hpp"

#include <algorithm>
#include <cmath>

#include "mripp/errors.hpp"

namespace mripp {

void PolicyConfig::validate() const {
  if (embed_dim < 1 || heads < 1 || embed_dim % heads != 0)
    throw PreconditionError("embed_dim must be a positive multiple of heads");
  if (encoder_layers < 0) throw PreconditionError("encoder_layers must be >= 0");
  if (ffn_dim < 0) throw PreconditionError("ffn_dim must be >= 0");
  if (state_pool < 1) throw PreconditionError("state_pool must be >= 1");
  if (!(logit_clip > 0.0)) throw PreconditionError("logit_clip must be > 0");
}

nlohmann::json to_json(const PolicyConfig& c) {
  return {{"embed_dim", c.embed_dim}, {"encoder_layers", c.encoder_layers}, {"heads", c.heads},
          {"ffn_dim", c.ffn_dim},     {"state_pool", c.state_pool},         {"logit_clip", c.logit_clip},
          {"init_seed", c.init_seed}};
}

PolicyConfig policy_config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  c.embed_dim = j.at("embed_dim").get<int>();
  c.encoder_layers = j.at("encoder_layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<int>();
  c.state_pool = j.at("state_pool").get<int>();
  c.logit_clip = j.at("logit_clip").get<double>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

PolicyInput make_policy_input(const CoordinationGraph& graph, double budget_fraction) {
  PolicyInput in;
  in.features = graph.features;
  in.mask = graph.budget_mask;
  in.state.resize(1, kStateDims);
  in.state.leftCols(kFeatureCount) = graph.state_features;
  in.state(0, kFeatureCount) = budget_fraction;
  return in;
}

void PolicyNet::add_linear(const std::string& prefix, int in, int out, bool bias, Rng& rng) {
  auto& w = params_.add(prefix + ".weight", in, out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (Eigen::Index i = 0; i < w.value.size(); ++i) w.value.data()[i] = rng.uniform(-bound, bound);
  if (bias) params_.add(prefix + ".bias", 1, out);
}

void PolicyNet::add_norm(const std::string& prefix, int width) {
  params_.add(prefix + ".gain", 1, width).value.setOnes();
  params_.add(prefix + ".shift", 1, width);
}

void PolicyNet::add_attention(const std::string& prefix, Rng& rng) {
  const int d = config_.embed_dim;
  add_linear(prefix + ".query", d, d, false, rng);
  add_linear(prefix + ".key", d, d, false, rng);
  add_linear(prefix + ".value", d, d, false, rng);
  add_linear(prefix + ".out", d, d, true, rng);
}

void PolicyNet::add_feed_forward(const std::string& prefix, Rng& rng) {
  add_linear(prefix + ".ff1", config_.embed_dim, config_.ffn_width(), true, rng);
  add_linear(prefix + ".ff2", config_.ffn_width(), config_.embed_dim, true, rng);
}

PolicyNet::PolicyNet(const PolicyConfig& config) : config_(config) {
  config_.validate();
  Rng rng(Rng::mix(config_.init_seed, 0xa77e));
  const int d = config_.embed_dim;
  add_linear("node_embed", kFeatureCount, d, true, rng);
  for (int l = 0; l < config_.encoder_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    add_attention(p + ".attn", rng);
    add_norm(p + ".norm1", d);
    add_feed_forward(p, rng);
    add_norm(p + ".norm2", d);
  }
  add_linear("state_embed", kStateDims, d, true, rng);
  add_attention("decoder.attn", rng);
  add_norm("decoder.norm1", d);
  add_feed_forward("decoder", rng);
  add_norm("decoder.norm2", d);
  add_linear("pointer.query", d, d, false, rng);
  add_linear("pointer.key", d, d, false, rng);
  add_linear("value.hidden", d, d, true, rng);
  add_linear("value.out", d, 1, true, rng);
}

ad::Var PolicyNet::linear(const Bind& bind, const std::string& prefix, const ad::Var& x, bool bias) const {
  ad::Var y = ad::matmul(x, bind(prefix + ".weight"));
  if (bias) y = ad::add_bias(y, bind(prefix + ".bias"));
  return y;
}

ad::Var PolicyNet::norm(const Bind& bind, const std::string& prefix, const ad::Var& x) const {
  return ad::layer_norm(x, bind(prefix + ".gain"), bind(prefix + ".shift"));
}

ad::Var PolicyNet::feed_forward(const Bind& bind, const std::string& prefix, const ad::Var& x) const {
  return linear(bind, prefix + ".ff2", ad::relu(linear(bind, prefix + ".ff1", x)));
}

ad::Var PolicyNet::attention(const Bind& bind, const std::string& prefix, const ad::Var& query, const ad::Var& keys,
                             const ad::Mask& mask) const {
  const int d = config_.embed_dim;
  const int dk = d / config_.heads;
  const ad::Var q = linear(bind, prefix + ".query", query, false);
  const ad::Var k = linear(bind, prefix + ".key", keys, false);
  const ad::Var v = linear(bind, prefix + ".value", keys, false);
  std::vector<ad::Var> heads;
  for (int h = 0; h < config_.heads; ++h) {
    const ad::Var qh = ad::slice_cols(q, h * dk, dk);
    const ad::Var kh = ad::slice_cols(k, h * dk, dk);
    const ad::Var vh = ad::slice_cols(v, h * dk, dk);
    const ad::Var scores = ad::scale(ad::matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dk)));
    heads.push_back(ad::matmul(ad::softmax_masked(scores, mask), vh));
  }
  return linear(bind, prefix + ".out", heads.size() == 1 ? heads[0] : ad::concat_cols(heads));
}

PolicyNet::Recorded PolicyNet::run(ad::Tape& tape, const PolicyInput& input, const Bind& bind) const {
  if (input.features.rows() == 0 || input.features.cols() != kFeatureCount)
    throw PreconditionError("policy: features must be L x 9 with L >= 1");
  if (input.mask.size() != input.size()) throw PreconditionError("policy: mask length must equal L");
  if (std::none_of(input.mask.begin(), input.mask.end(), [](std::uint8_t m) { return m != 0; }))
    throw PreconditionError("policy: every candidate is masked");
  if (input.state.rows() != 1 || input.state.cols() != kStateDims)
    throw PreconditionError("policy: planning state must be 1 x 10");

  ad::Var h = linear(bind, "node_embed", tape.constant(input.features));
  for (int l = 0; l < config_.encoder_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    h = norm(bind, p + ".norm1", h + attention(bind, p + ".attn", h, h, {}));
    h = norm(bind, p + ".norm2", h + feed_forward(bind, p, h));
  }
  ad::Var c = linear(bind, "state_embed", tape.constant(input.state));
  c = norm(bind, "decoder.norm1", c + attention(bind, "decoder.attn", c, h, input.mask));
  c = norm(bind, "decoder.norm2", c + feed_forward(bind, "decoder", c));

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(config_.embed_dim));
  const ad::Var compat = ad::matmul_nt(linear(bind, "pointer.query", c, false), linear(bind, "pointer.key", h, false));
  const ad::Var logits = ad::scale(ad::tanh(ad::scale(compat, inv_sqrt_d)), config_.logit_clip);

  Recorded out;
  out.log_probs = ad::log_softmax_masked(logits, input.mask);
  out.probs = ad::softmax_masked(logits, input.mask);
  out.value = linear(bind, "value.out", ad::relu(linear(bind, "value.hidden", c)));
  return out;
}

PolicyNet::Recorded PolicyNet::forward(ad::Tape& tape, const PolicyInput& input) {
  return run(tape, input, [&](const std::string& name) { return tape.param(params_.at(name)); });
}

PolicyOutput PolicyNet::evaluate(const PolicyInput& input) const {
  ad::Tape tape;
  const auto rec = run(tape, input, [&](const std::string& name) { return tape.constant(params_.at(name).value); });
  PolicyOutput out;
  const auto& p = rec.probs.value();
  out.probs.assign(p.data(), p.data() + p.size());
  out.value = rec.value.scalar();
  return out;
}

nlohmann::json PolicyNet::to_json() const {
  return {{"format", "mripp-policy"}, {"version", 1}, {"model", mripp::to_json(config_)}, {"params", params_.to_json()}};
}

PolicyNet PolicyNet::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "mripp-policy") throw PreconditionError("not a policy checkpoint");
  PolicyNet net(policy_config_from_json(j.at("model")));
  net.params_.load_json(j.at("params"));
  return net;
}

std::size_t select_action(const std::vector<double>& probs, SelectMode mode, Rng* rng) {
  if (probs.empty()) throw PreconditionError("select_action: empty distribution");
  if (mode == SelectMode::Sample && rng == nullptr) throw PreconditionError("select_action: sampling needs a random stream");
  if (mode == SelectMode::Greedy) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
      if (probs[i] > probs[best]) best = i;
    return best;
  }
  const double u = rng->uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last;
}

}  // namespace mripp
