#include "mripp/ppo.hpp"

#include "mripp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mripp {

using nlohmann::json;

void TrainConfig::validate() const {
  if (parallel_envs < 1) throw PreconditionError("parallel_envs must be >= 1");
  if (epochs < 1) throw PreconditionError("epochs must be >= 1");
  if (batch_size < 1) throw PreconditionError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw PreconditionError("learning_rate must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw PreconditionError("lr_decay must be in (0, 1]");
  if (decay_every < 1) throw PreconditionError("decay_every must be >= 1");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw PreconditionError("clip_eps must be in (0, 1)");
  if (!(discount >= 0.0 && discount <= 1.0)) throw PreconditionError("discount must be in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw PreconditionError("gae_lambda must be in [0, 1]");
  if (value_coef < 0.0 || entropy_coef < 0.0 || max_grad_norm < 0.0)
    throw PreconditionError("loss coefficients must be >= 0");
  if (total_interactions < 1) throw PreconditionError("total_interactions must be >= 1");
  if (!(budget_min > 0.0 && budget_min <= budget_max)) throw PreconditionError("need 0 < budget_min <= budget_max");
  if (threads < 0 || checkpoint_every < 0) throw PreconditionError("threads and checkpoint_every must be >= 0");
}

json to_json(const TrainConfig& c) {
  return {{"parallel_envs", c.parallel_envs},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"lr_decay", c.lr_decay},
          {"decay_every", c.decay_every},
          {"clip_eps", c.clip_eps},
          {"discount", c.discount},
          {"gae_lambda", c.gae_lambda},
          {"value_coef", c.value_coef},
          {"entropy_coef", c.entropy_coef},
          {"max_grad_norm", c.max_grad_norm},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"total_interactions", c.total_interactions},
          {"budget_min", c.budget_min},
          {"budget_max", c.budget_max},
          {"threads", c.threads},
          {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.parallel_envs = j.at("parallel_envs").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.lr_decay = j.at("lr_decay").get<double>();
  c.decay_every = j.at("decay_every").get<int>();
  c.clip_eps = j.at("clip_eps").get<double>();
  c.discount = j.at("discount").get<double>();
  c.gae_lambda = j.at("gae_lambda").get<double>();
  c.value_coef = j.at("value_coef").get<double>();
  c.entropy_coef = j.at("entropy_coef").get<double>();
  c.max_grad_norm = j.at("max_grad_norm").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.total_interactions = j.at("total_interactions").get<long>();
  c.budget_min = j.at("budget_min").get<double>();
  c.budget_max = j.at("budget_max").get<double>();
  c.threads = j.at("threads").get<int>();
  c.checkpoint_every = j.at("checkpoint_every").get<int>();
  return c;
}

double learning_rate_at(const TrainConfig& c, long optimizer_step) {
  return c.learning_rate * std::pow(c.lr_decay, static_cast<double>(optimizer_step / c.decay_every));
}

void compute_gae(std::vector<Transition>& ts, double discount, double lambda) {
  double next_adv = 0.0;
  double next_value = 0.0;
  for (std::size_t k = ts.size(); k-- > 0;) {
    Transition& t = ts[k];
    const double keep = t.done ? 0.0 : 1.0;
    const double delta = t.reward + discount * next_value * keep - t.value;
    t.advantage = delta + discount * lambda * keep * next_adv;
    t.ret = t.advantage + t.value;
    next_adv = t.advantage;
    next_value = t.value;
  }
}

std::vector<Transition> transitions_from_episode(const EpisodeResult& result, double discount, double lambda) {
  std::map<int, std::vector<Transition>> per_robot;
  for (const DecisionRecord& d : result.decisions) {
    Transition t;
    t.robot = d.robot;
    t.input = d.decision.input;
    t.index = d.decision.index;
    t.log_prob = d.decision.log_prob;
    t.value = d.decision.value;
    t.reward = d.reward;
    t.done = d.done;
    per_robot[d.robot].push_back(std::move(t));
  }
  std::vector<Transition> out;
  for (auto& [robot, ts] : per_robot) {
    compute_gae(ts, discount, lambda);
    for (auto& t : ts) out.push_back(std::move(t));
  }
  return out;
}

EpisodeConfig training_episode(const EpisodeConfig& base, const TrainConfig& train, std::uint64_t seed) {
  EpisodeConfig c = base;
  c.seed = seed;
  c.world.seed = Rng::mix(seed, 7);
  Rng rng(Rng::mix(seed, 11));
  c.total_budget = rng.uniform(train.budget_min, train.budget_max);
  c.compute_rewards = true;
  for (auto& p : c.planners) {
    p.kind = PlannerKind::Policy;
    p.policy_mode = SelectMode::Sample;
  }
  return c;
}

RolloutBuffer collect_rollouts(std::shared_ptr<const PolicyNet> policy, const EpisodeConfig& base,
                               const TrainConfig& train, const std::vector<std::uint64_t>& seeds) {
  std::vector<std::vector<Transition>> per_episode(seeds.size());
  std::vector<EpisodeSummary> summaries(seeds.size());
  try {
    parallel_for(seeds.size(), train.threads, [&](std::size_t k) {
      const EpisodeConfig cfg = training_episode(base, train, seeds[k]);
      const World world = generate_world(cfg.world);
      const EpisodeResult r = run_episode(world, cfg, policy);
      per_episode[k] = transitions_from_episode(r, train.discount, train.gae_lambda);
      EpisodeSummary& s = summaries[k];
      s.seed = seeds[k];
      s.total_budget = cfg.total_budget;
      double total = 0.0;
      for (const auto& d : r.decisions) total += d.reward;
      s.mean_robot_return = total / cfg.robots;
      s.pct_targets = r.pct_targets;
      s.transitions = static_cast<int>(per_episode[k].size());
    });
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("rollout worker failed: ") + e.what());
  }

  RolloutBuffer buf;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    for (auto& t : per_episode[k]) buf.transitions.push_back(std::move(t));
    buf.episodes.push_back(summaries[k]);
  }
  return buf;
}

Adam::Adam(const ad::ParameterSet& params) {
  for (const ad::Parameter* p : params.all()) {
    m_[p->name] = ad::Tensor::Zero(p->value.rows(), p->value.cols());
    v_[p->name] = ad::Tensor::Zero(p->value.rows(), p->value.cols());
  }
}

void Adam::step(ad::ParameterSet& params, double lr, const TrainConfig& c) {
  ++t_;
  const double bc1 = 1.0 - std::pow(c.adam_beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(c.adam_beta2, static_cast<double>(t_));
  for (ad::Parameter* p : params.all()) {
    auto mi = m_.find(p->name);
    if (mi == m_.end()) throw PreconditionError("Adam: unknown parameter " + p->name);
    ad::Tensor& m = mi->second;
    ad::Tensor& v = v_.at(p->name);
    if (p->grad.size() == 0) continue;
    m = c.adam_beta1 * m + (1.0 - c.adam_beta1) * p->grad;
    v = c.adam_beta2 * v + (1.0 - c.adam_beta2) * p->grad.cwiseProduct(p->grad);
    p->value.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.adam_eps);
  }
}

json Adam::to_json() const {
  json m = json::object();
  json v = json::object();
  auto flat = [](const ad::Tensor& t) { return std::vector<double>(t.data(), t.data() + t.size()); };
  for (const auto& [name, t] : m_) m[name] = {{"shape", {t.rows(), t.cols()}}, {"values", flat(t)}};
  for (const auto& [name, t] : v_) v[name] = {{"shape", {t.rows(), t.cols()}}, {"values", flat(t)}};
  return {{"t", t_}, {"m", m}, {"v", v}};
}

Adam Adam::from_json(const json& j) {
  Adam a;
  a.t_ = j.at("t").get<long>();
  auto load = [](const json& src, std::map<std::string, ad::Tensor>& dst) {
    for (const auto& [name, e] : src.items()) {
      const auto rows = e.at("shape").at(0).get<Eigen::Index>();
      const auto cols = e.at("shape").at(1).get<Eigen::Index>();
      const auto vals = e.at("values").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(vals.size()) != rows * cols) throw PreconditionError("Adam state size mismatch");
      dst[name] = Eigen::Map<const ad::Tensor>(vals.data(), rows, cols);
    }
  };
  load(j.at("m"), a.m_);
  load(j.at("v"), a.v_);
  return a;
}

MinibatchLoss ppo_loss(ad::Tape& tape, PolicyNet& net, const std::vector<const Transition*>& batch,
                       const TrainConfig& c) {
  if (batch.empty()) throw PreconditionError("ppo_loss: empty batch");
  MinibatchLoss out;
  ad::Var total;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const Transition* t : batch) {
    const PolicyNet::Recorded rec = net.forward(tape, t->input);
    const auto idx = static_cast<Eigen::Index>(t->index);
    const ad::Var logp = ad::gather(rec.log_probs, 0, idx);
    const ad::Var ratio = ad::exp(ad::add_scalar(logp, -t->log_prob));
    const ad::Var surr = ad::minimum(ad::scale(ratio, t->advantage),
                                     ad::scale(ad::clamp(ratio, 1.0 - c.clip_eps, 1.0 + c.clip_eps), t->advantage));
    const ad::Var vloss = ad::square(ad::add_scalar(rec.value, -t->ret));
    const ad::Var entropy = ad::scale(ad::sum(ad::mul(rec.probs, rec.log_probs)), -1.0);
    const ad::Var term = ad::scale(surr, -1.0) + c.value_coef * vloss - c.entropy_coef * entropy;
    total = total.valid() ? total + term : term;

    const double r = ratio.scalar();
    out.policy_loss -= surr.scalar() * inv;
    out.value_loss += vloss.scalar() * inv;
    out.entropy += entropy.scalar() * inv;
    out.approx_kl += (t->log_prob - logp.scalar()) * inv;
    out.clip_fraction += (std::abs(r - 1.0) > c.clip_eps ? 1.0 : 0.0) * inv;
    out.ratio_deviation += std::abs(r - 1.0) * inv;
  }
  out.loss = ad::scale(total, inv);
  return out;
}

UpdateStats ppo_update(PolicyNet& net, Adam& adam, const std::vector<Transition>& buffer, const TrainConfig& c,
                       Rng& rng) {
  if (buffer.empty()) throw PreconditionError("ppo_update: empty buffer");
  const std::size_t mb = std::min<std::size_t>(static_cast<std::size_t>(c.batch_size), buffer.size());
  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), 0);

  UpdateStats stats;
  int batches = 0;
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t end = std::min(order.size(), start + mb);
      std::vector<Transition> local;
      local.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) local.push_back(buffer[order[k]]);
      double mean = 0.0;
      for (const auto& t : local) mean += t.advantage;
      mean /= static_cast<double>(local.size());
      double var = 0.0;
      for (const auto& t : local) var += (t.advantage - mean) * (t.advantage - mean);
      const double sd = local.size() > 1 ? std::sqrt(var / static_cast<double>(local.size())) : 0.0;
      for (auto& t : local) t.advantage = sd > 1e-8 ? (t.advantage - mean) / sd : t.advantage - mean;

      std::vector<const Transition*> ptrs;
      for (const auto& t : local) ptrs.push_back(&t);
      net.params().zero_grad();
      ad::Tape tape;
      const MinibatchLoss l = ppo_loss(tape, net, ptrs, c);
      const double loss_value = l.loss.scalar();
      if (!std::isfinite(loss_value))
        throw TrainingAborted("non-finite PPO loss at optimizer step " + std::to_string(adam.steps()), net.to_json());
      tape.backward(l.loss);

      if (c.max_grad_norm > 0.0) {
        double sq = 0.0;
        for (const ad::Parameter* p : net.params().all())
          if (p->grad.size() != 0) sq += p->grad.squaredNorm();
        const double norm = std::sqrt(sq);
        if (!std::isfinite(norm))
          throw TrainingAborted("non-finite gradient at optimizer step " + std::to_string(adam.steps()), net.to_json());
        if (norm > c.max_grad_norm)
          for (ad::Parameter* p : net.params().all())
            if (p->grad.size() != 0) p->grad *= c.max_grad_norm / norm;
      }
      const double lr = learning_rate_at(c, adam.steps());
      adam.step(net.params(), lr, c);

      if (batches == 0) stats.first_ratio_deviation = l.ratio_deviation;
      stats.policy_loss += l.policy_loss;
      stats.value_loss += l.value_loss;
      stats.entropy += l.entropy;
      stats.approx_kl += l.approx_kl;
      stats.clip_fraction += l.clip_fraction;
      stats.learning_rate = lr;
      ++batches;
    }
  }
  stats.optimizer_steps = batches;
  stats.policy_loss /= batches;
  stats.value_loss /= batches;
  stats.entropy /= batches;
  stats.approx_kl /= batches;
  stats.clip_fraction /= batches;
  return stats;
}

json TrainerState::to_json(const TrainConfig& train, const EpisodeConfig& episode) const {
  return {{"format", "mripp-checkpoint"},
          {"version", kCheckpointFormatVersion},
          {"policy", net->to_json()},
          {"adam", adam.to_json()},
          {"updates", updates},
          {"interactions", interactions},
          {"seed", seed},
          {"train", mripp::to_json(train)},
          {"episode", mripp::to_json(episode)}};
}

TrainerState TrainerState::from_json(const json& j) {
  if (j.value("format", "") != "mripp-checkpoint") throw PreconditionError("not a training checkpoint");
  if (j.at("version").get<int>() != kCheckpointFormatVersion) throw PreconditionError("unsupported checkpoint version");
  TrainerState s;
  s.net = std::make_shared<PolicyNet>(PolicyNet::from_json(j.at("policy")));
  s.adam = Adam::from_json(j.at("adam"));
  s.updates = j.at("updates").get<int>();
  s.interactions = j.at("interactions").get<long>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

std::string training_csv_header() {
  return "update,interactions,mean_return,pct_targets,policy_loss,value_loss,entropy,approx_kl,clip_fraction,lr,"
         "optimizer_steps";
}

std::string training_csv_row(const TrainingRow& r) {
  std::ostringstream o;
  o.precision(10);
  o << r.update << ',' << r.interactions << ',' << r.mean_return << ',' << r.pct_targets << ',' << r.stats.policy_loss
    << ',' << r.stats.value_loss << ',' << r.stats.entropy << ',' << r.stats.approx_kl << ','
    << r.stats.clip_fraction << ',' << r.stats.learning_rate << ',' << r.stats.optimizer_steps;
  return o.str();
}

void train(TrainerState& state, const EpisodeConfig& episode, const TrainConfig& train,
           const std::function<void(const TrainingRow&, const TrainerState&)>& on_update) {
  train.validate();
  episode.validate();
  if (!state.net) throw PreconditionError("train: trainer state has no network");
  while (state.interactions < train.total_interactions) {
    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < train.parallel_envs; ++k)
      seeds.push_back(Rng::mix(state.seed, static_cast<std::uint64_t>(state.updates) * train.parallel_envs + k));
    const auto frozen = std::make_shared<const PolicyNet>(*state.net);
    const RolloutBuffer buf = collect_rollouts(frozen, episode, train, seeds);
    if (buf.transitions.empty()) throw std::runtime_error("rollouts produced no transitions; check budget and world");

    Rng rng(Rng::mix(state.seed, 0xABCDEFULL + static_cast<std::uint64_t>(state.updates)));
    TrainingRow row;
    row.stats = ppo_update(*state.net, state.adam, buf.transitions, train, rng);
    state.interactions += static_cast<long>(buf.transitions.size());
    ++state.updates;
    row.update = state.updates;
    row.interactions = state.interactions;
    for (const auto& e : buf.episodes) {
      row.mean_return += e.mean_robot_return / static_cast<double>(buf.episodes.size());
      row.pct_targets += e.pct_targets / static_cast<double>(buf.episodes.size());
    }
    if (on_update) on_update(row, state);
  }
}

}  // namespace mripp
