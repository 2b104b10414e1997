#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vpm/nn.hpp"
#include "vpm/observation.hpp"
#include "vpm/planners.hpp"
#include "vpm/world.hpp"

namespace vpm {

// Reward-to-go: G(t) = sum_{tau >= t} gamma^(tau - t) r(tau).
inline std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must be in [0, 1]");
  std::vector<double> g(rewards.size(), 0.0);
  double acc = 0.0;
  for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
    acc = rewards[t] + gamma * acc;
    g[t] = acc;
  }
  return g;
}

// Experience for one update: flattened per (step, agent) with the shared
// scaled reward and its return per step. The advantage is return minus the
// critic estimate recorded at collection time. A batch may span several
// episodes; returns never leak across an episode boundary. The monitoring
// task is continuing and episodes are cut at a fixed horizon, so each
// episode's return can be bootstrapped with the critic's estimate of the
// state just past the cut (tail_value, zero when bootstrapping is off).
struct RolloutBatch {
  int n_agents = 0;
  int steps = 0;
  std::vector<Observation> obs;  // steps * n_agents, agent-major within a step
  std::vector<int> actions;
  std::vector<double> logp;
  std::vector<double> value;
  std::vector<double> reward;          // per step (scaled shared reward)
  std::vector<int> episode_starts;     // first step index of each episode
  std::vector<double> tail_values;     // per episode
  std::vector<double> ret;             // per step
  std::vector<double> adv;             // per (step, agent); normalized copy in adv_norm
  std::vector<double> adv_norm;

  int flat(int t, int agent) const { return t * n_agents + agent; }

  void compute_returns(double gamma) {
    if (episode_starts.empty()) episode_starts.push_back(0);
    if (tail_values.size() != episode_starts.size())
      tail_values.assign(episode_starts.size(), 0.0);
    ret.assign(static_cast<std::size_t>(steps), 0.0);
    for (std::size_t e = 0; e < episode_starts.size(); ++e) {
      const int first = episode_starts[e];
      const int last = (e + 1 < episode_starts.size() ? episode_starts[e + 1] : steps) - 1;
      double acc = tail_values[e];
      for (int t = last; t >= first; --t) {
        acc = reward[t] + gamma * acc;
        ret[t] = acc;
      }
    }
    adv.assign(static_cast<std::size_t>(steps) * n_agents, 0.0);
    for (int t = 0; t < steps; ++t)
      for (int i = 0; i < n_agents; ++i) adv[flat(t, i)] = ret[t] - value[flat(t, i)];
  }

  void normalize_advantages(bool enabled) {
    adv_norm = adv;
    if (!enabled || adv.empty()) return;
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(adv.size());
    const double inv = 1.0 / (std::sqrt(var) + 1e-8);
    for (double& a : adv_norm) a = (a - mean) * inv;
  }

  bool finite() const {
    for (double x : logp)
      if (!std::isfinite(x)) return false;
    for (double x : value)
      if (!std::isfinite(x)) return false;
    for (double x : reward)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

struct PpoConfig {
  double gamma = 0.99;
  double clip_eps = 0.2;
  double lr = 3e-4;
  double c_value = 0.5;
  double c_entropy = 0.01;
  int epochs = 4;
  int minibatch = 256;  // timesteps per minibatch
  bool adv_norm = true;
};

struct LossStats {
  double total = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

// Clipped-surrogate loss over the selected timesteps, built on a fresh tape:
//   L = -mean_i,t min(ratio*A, clip(ratio, 1-eps, 1+eps)*A)
//       + c_v * mean (G - V)^2  -  c_e * mean entropy.
// The surrogate is maximized, hence the leading minus for gradient descent;
// the value and entropy terms train the critic and keep exploration alive.
inline Tape::Ref ppo_loss(Tape& t, const NetRefs& refs, const NetConfig& cfg,
                          const RolloutBatch& batch, std::span<const int> step_indices,
                          const PpoConfig& ppo, LossStats* stats = nullptr) {
  if (batch.steps == 0 || step_indices.empty())
    throw std::invalid_argument("ppo_loss: empty batch");
  if (!batch.finite()) throw std::runtime_error("ppo_loss: non-finite values in rollout batch");
  if (batch.adv_norm.size() != batch.adv.size())
    throw std::logic_error("ppo_loss: advantages not normalized yet");

  std::vector<Tape::Ref> surr_terms, value_terms, entropy_terms;
  for (int step : step_indices) {
    std::vector<Tape::Ref> obs_refs;
    for (int i = 0; i < batch.n_agents; ++i)
      obs_refs.push_back(t.input(observation_tensor(batch.obs[batch.flat(step, i)])));
    const JointForward fwd = policy_forward(t, refs, cfg, obs_refs);
    for (int i = 0; i < batch.n_agents; ++i) {
      const int k = batch.flat(step, i);
      const Tape::Ref ls = t.log_softmax(fwd.logits[i]);
      const Tape::Ref ratio =
          t.exp(t.add_const(t.pick(ls, batch.actions[k]), -batch.logp[k]));
      const double a = batch.adv_norm[k];
      const Tape::Ref surr = t.minimum(
          t.scale(ratio, a),
          t.scale(t.clamp(ratio, 1.0 - ppo.clip_eps, 1.0 + ppo.clip_eps), a));
      surr_terms.push_back(surr);

      const Tape::Ref verr = t.add_const(fwd.value[i], -batch.ret[step]);
      value_terms.push_back(t.mul(verr, verr));

      entropy_terms.push_back(t.neg(t.sum(t.mul(t.exp(ls), ls))));
    }
  }

  const Tape::Ref surr_mean = t.mean(t.stack(surr_terms));
  const Tape::Ref value_mean = t.mean(t.stack(value_terms));
  const Tape::Ref entropy_mean = t.mean(t.stack(entropy_terms));
  const Tape::Ref loss = t.add(
      t.neg(surr_mean),
      t.add(t.scale(value_mean, ppo.c_value), t.scale(entropy_mean, -ppo.c_entropy)));
  if (stats) {
    stats->total = t.val(loss)[0];
    stats->surrogate = t.val(surr_mean)[0];
    stats->value_loss = t.val(value_mean)[0];
    stats->entropy = t.val(entropy_mean)[0];
  }
  return loss;
}

// Adaptive per-parameter moment estimation, matched to the order of
// PolicyNet::named_params().
class Adam {
public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void init(PolicyNet& net) {
    m_.clear();
    v_.clear();
    t_ = 0;
    for (auto& [name, p] : net.named_params()) {
      m_.push_back(Tensor(p->value.shape));
      v_.push_back(Tensor(p->value.shape));
    }
  }

  void step(PolicyNet& net) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    std::size_t k = 0;
    for (auto& [name, p] : net.named_params()) {
      Tensor& m = m_[k];
      Tensor& v = v_[k];
      for (int i = 0; i < p->value.size(); ++i) {
        const double g = p->grad[i];
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        p->value[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
      }
      ++k;
    }
  }

  double lr() const { return lr_; }

private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct TrainConfig {
  int n_agents = 1;
  int episodes = 500;
  int steps = 100;  // per episode
  int fov = 5;
  double decay = 1.0;
  double max_penalty = 400.0;
  ObsMode obs_mode = ObsMode::Local;
  std::uint64_t seed = 0;
  int episodes_per_update = 1;
  int checkpoint_every = 100;
  bool bootstrap_tail = true;  // bootstrap truncated episodes with the critic
  PpoConfig ppo;
};

struct EpisodeStat {
  int episode = 0;
  double cumulative_penalty = 0.0;  // sum of |raw shared reward| over the episode
  double loss = 0.0;
  double entropy = 0.0;
};

struct TrainResult {
  std::vector<EpisodeStat> curve;
  bool diverged = false;
  int episodes_done = 0;
};

namespace detail {
inline void copy_params(PolicyNet& dst, PolicyNet& src) {
  auto d = dst.named_params();
  auto s = src.named_params();
  for (std::size_t i = 0; i < d.size(); ++i) d[i].second->value = s[i].second->value;
}
}  // namespace detail

// On-policy training loop: collect one batch of episodes with the current
// policy (shared reward broadcast to every agent), compute reward-to-go and
// advantages, then run clipped-surrogate epochs over shuffled timestep
// minibatches. Rewards are scaled by 1/(free_cells * max_penalty) before
// storage so returns stay O(1). Fully deterministic for a given seed. A
// non-finite loss halts training and rolls the parameters back to the last
// completed update.
inline TrainResult train(PolicyNet& net, const GridMap& map,
                         const std::vector<Cell>& declared_starts, const TrainConfig& cfg,
                         const std::function<void(const EpisodeStat&)>& on_episode = nullptr,
                         const std::function<void(int, PolicyNet&)>& on_checkpoint = nullptr) {
  if (cfg.n_agents < 1 || cfg.episodes < 1 || cfg.steps < 1)
    throw std::invalid_argument("train: agents, episodes and steps must all be positive");

  Rng root(cfg.seed);
  Rng env_rng = root.split(1);
  Rng action_rng = root.split(2);
  Rng shuffle_rng = root.split(3);

  const double reward_scale = 1.0 / (map.free_count() * cfg.max_penalty);
  TrainResult result;

  PolicyNet backup = net;  // last-good parameter snapshot
  Adam opt(cfg.ppo.lr);
  opt.init(net);

  RolloutBatch batch;
  batch.n_agents = cfg.n_agents;
  int episodes_in_batch = 0;
  std::vector<EpisodeStat> pending;

  for (int ep = 1; ep <= cfg.episodes; ++ep) {
    WorldState world = make_world(map, cfg.decay, cfg.max_penalty,
                                  choose_starts(map, declared_starts, cfg.n_agents, env_rng));
    double cum_penalty = 0.0;
    double ent_sum = 0.0;
    batch.episode_starts.push_back(batch.steps);
    for (int t = 0; t < cfg.steps; ++t) {
      std::vector<Observation> obs;
      obs.reserve(cfg.n_agents);
      for (int i = 0; i < cfg.n_agents; ++i)
        obs.push_back(make_observation(world, i, cfg.obs_mode));
      const ActResult act = net_act(net, obs, action_rng, /*greedy=*/false);

      std::vector<Action> joint(cfg.n_agents);
      for (int i = 0; i < cfg.n_agents; ++i) joint[i] = static_cast<Action>(act.actions[i]);
      const double raw_reward = step(world, joint, cfg.fov);
      cum_penalty += std::abs(raw_reward);

      for (int i = 0; i < cfg.n_agents; ++i) {
        batch.obs.push_back(std::move(obs[i]));
        batch.actions.push_back(act.actions[i]);
        batch.logp.push_back(act.logp[i]);
        batch.value.push_back(act.value[i]);
        ent_sum += act.entropy[i];
      }
      batch.reward.push_back(raw_reward * reward_scale);
      ++batch.steps;
    }
    double tail = 0.0;
    if (cfg.bootstrap_tail) {
      std::vector<Observation> obs_tail;
      obs_tail.reserve(cfg.n_agents);
      for (int i = 0; i < cfg.n_agents; ++i)
        obs_tail.push_back(make_observation(world, i, cfg.obs_mode));
      const ActResult v = net_act(net, obs_tail, action_rng, /*greedy=*/true);
      for (double x : v.value) tail += x;
      tail /= cfg.n_agents;
    }
    batch.tail_values.push_back(tail);
    ++episodes_in_batch;

    EpisodeStat stat;
    stat.episode = ep;
    stat.cumulative_penalty = cum_penalty;
    stat.entropy = ent_sum / (cfg.steps * cfg.n_agents);
    pending.push_back(stat);

    if (episodes_in_batch >= cfg.episodes_per_update || ep == cfg.episodes) {
      batch.compute_returns(cfg.ppo.gamma);
      batch.normalize_advantages(cfg.ppo.adv_norm);

      detail::copy_params(backup, net);
      double loss_sum = 0.0;
      int loss_count = 0;
      bool diverged = false;
      for (int epoch = 0; epoch < cfg.ppo.epochs && !diverged; ++epoch) {
        std::vector<int> order(batch.steps);
        std::iota(order.begin(), order.end(), 0);
        shuffle_rng.shuffle(order);
        for (int start = 0; start < batch.steps && !diverged; start += cfg.ppo.minibatch) {
          const int end = std::min(batch.steps, start + cfg.ppo.minibatch);
          std::span<const int> idx(order.data() + start, static_cast<std::size_t>(end - start));
          Tape tape;
          const NetRefs refs = bind_params(tape, net);
          LossStats stats;
          const Tape::Ref loss = ppo_loss(tape, refs, net.cfg, batch, idx, cfg.ppo, &stats);
          if (!std::isfinite(stats.total)) {
            diverged = true;
            break;
          }
          net.zero_grads();
          tape.backward(loss);
          opt.step(net);
          loss_sum += stats.total;
          ++loss_count;
        }
      }
      if (diverged) {
        detail::copy_params(net, backup);
        result.diverged = true;
      }

      const double mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
      for (EpisodeStat& s : pending) {
        s.loss = mean_loss;
        result.curve.push_back(s);
        if (on_episode) on_episode(s);
      }
      pending.clear();
      batch = RolloutBatch{};
      batch.n_agents = cfg.n_agents;
      episodes_in_batch = 0;

      if (result.diverged) {
        result.episodes_done = ep;
        return result;
      }
    }

    if (on_checkpoint && cfg.checkpoint_every > 0 && ep % cfg.checkpoint_every == 0)
      on_checkpoint(ep, net);
  }
  result.episodes_done = cfg.episodes;
  return result;
}

// Deployment wrapper: renders observations, runs the shared network for
// every agent, picks actions (greedy by default).
class NetPolicy : public Policy {
public:
  NetPolicy(PolicyNet net, ObsMode mode, Rng rng, bool greedy = true)
      : net_(std::move(net)), mode_(mode), rng_(rng), greedy_(greedy) {}

  std::vector<Action> act(const WorldState& state) override {
    std::vector<Observation> obs;
    obs.reserve(state.agents.size());
    for (std::size_t i = 0; i < state.agents.size(); ++i)
      obs.push_back(make_observation(state, static_cast<int>(i), mode_));
    const ActResult r = net_act(net_, obs, rng_, greedy_);
    std::vector<Action> joint(state.agents.size());
    for (std::size_t i = 0; i < joint.size(); ++i) joint[i] = static_cast<Action>(r.actions[i]);
    return joint;
  }

  std::string name() const override { return "net"; }
  PolicyNet& net() { return net_; }

private:
  PolicyNet net_;
  ObsMode mode_;
  Rng rng_;
  bool greedy_;
};

}  // namespace vpm
