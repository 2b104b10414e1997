#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "vpm/autodiff.hpp"
#include "vpm/observation.hpp"
#include "vpm/rng.hpp"

namespace vpm {

using ad::Tape;
using ad::Tensor;

struct NetConfig {
  int channels = 2;       // observation channels (1 or 2)
  int feature_dim = 128;  // width of h and of the aggregated h'
  int heads = 3;          // attention heads
  int head_hidden = 64;   // hidden width of the actor/critic heads
  double leaky_slope = 0.2;
};

struct Param {
  Tensor value;
  Tensor grad;
};

// Shared parameter set: one copy serves every agent, so the same network
// deploys unchanged for any agent count.
struct PolicyNet {
  NetConfig cfg;
  Param conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b;
  std::vector<Param> gat_w;  // per head, [F, F]
  std::vector<Param> gat_a;  // per head, [2F]
  Param actor_h_w, actor_h_b, actor_out_w, actor_out_b;
  Param critic_h_w, critic_h_b, critic_out_w, critic_out_b;

  static constexpr int kConv1Filters = 8;
  static constexpr int kConv2Filters = 16;
  static constexpr int kKernel = 3;
  static constexpr int kStride = 2;
  // 25 -> 12 -> 5 spatial, so the flattened encoder output is 16*5*5.
  static constexpr int kFlat = 400;

  std::vector<std::pair<std::string, Param*>> named_params() {
    std::vector<std::pair<std::string, Param*>> out = {
        {"conv1_w", &conv1_w}, {"conv1_b", &conv1_b}, {"conv2_w", &conv2_w},
        {"conv2_b", &conv2_b}, {"fc_w", &fc_w},       {"fc_b", &fc_b},
    };
    for (std::size_t m = 0; m < gat_w.size(); ++m)
      out.push_back({"gat_w" + std::to_string(m), &gat_w[m]});
    for (std::size_t m = 0; m < gat_a.size(); ++m)
      out.push_back({"gat_a" + std::to_string(m), &gat_a[m]});
    out.push_back({"actor_h_w", &actor_h_w});
    out.push_back({"actor_h_b", &actor_h_b});
    out.push_back({"actor_out_w", &actor_out_w});
    out.push_back({"actor_out_b", &actor_out_b});
    out.push_back({"critic_h_w", &critic_h_w});
    out.push_back({"critic_h_b", &critic_h_b});
    out.push_back({"critic_out_w", &critic_out_w});
    out.push_back({"critic_out_b", &critic_out_b});
    return out;
  }

  void zero_grads() {
    for (auto& [name, p] : named_params()) p->grad = Tensor(p->value.shape);
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& [name, p] : named_params()) n += p->value.v.size();
    return n;
  }
};

namespace detail {
inline Tensor xavier(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
  Tensor t(shape);
  const double lim = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& x : t.v) x = rng.uniform(-lim, lim);
  return t;
}
inline Param make_param(Tensor t) {
  Param p;
  p.grad = Tensor(t.shape);
  p.value = std::move(t);
  return p;
}
}  // namespace detail

// Hidden layers use Xavier-uniform init; the actor and critic output layers
// start at zero so the initial policy is uniform and the initial value is
// the bias.
inline PolicyNet make_policy_net(const NetConfig& cfg, Rng& rng) {
  using detail::make_param;
  using detail::xavier;
  PolicyNet net;
  net.cfg = cfg;
  const int F = cfg.feature_dim;
  const int C = cfg.channels;
  const int K = PolicyNet::kKernel;
  const int f1 = PolicyNet::kConv1Filters, f2 = PolicyNet::kConv2Filters;

  net.conv1_w = make_param(xavier({f1, C, K, K}, C * K * K, f1 * K * K, rng));
  net.conv1_b = make_param(Tensor({f1}));
  net.conv2_w = make_param(xavier({f2, f1, K, K}, f1 * K * K, f2 * K * K, rng));
  net.conv2_b = make_param(Tensor({f2}));
  net.fc_w = make_param(xavier({F, PolicyNet::kFlat}, PolicyNet::kFlat, F, rng));
  net.fc_b = make_param(Tensor({F}));

  for (int m = 0; m < cfg.heads; ++m) {
    net.gat_w.push_back(make_param(xavier({F, F}, F, F, rng)));
    net.gat_a.push_back(make_param(xavier({2 * F}, 2 * F, 1, rng)));
  }

  const int H = cfg.head_hidden;
  net.actor_h_w = make_param(xavier({H, 2 * F}, 2 * F, H, rng));
  net.actor_h_b = make_param(Tensor({H}));
  net.actor_out_w = make_param(Tensor({kActionCount, H}));
  net.actor_out_b = make_param(Tensor({kActionCount}));
  net.critic_h_w = make_param(xavier({H, 2 * F}, 2 * F, H, rng));
  net.critic_h_b = make_param(Tensor({H}));
  net.critic_out_w = make_param(Tensor({1, H}));
  net.critic_out_b = make_param(Tensor({1}));
  return net;
}

// Parameter leaves bound onto a tape; build once per tape and reuse across
// every sample in a minibatch.
struct NetRefs {
  Tape::Ref conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b;
  std::vector<Tape::Ref> gat_w, gat_a;
  Tape::Ref actor_h_w, actor_h_b, actor_out_w, actor_out_b;
  Tape::Ref critic_h_w, critic_h_b, critic_out_w, critic_out_b;
};

inline NetRefs bind_params(Tape& t, PolicyNet& net) {
  auto bind = [&t](Param& p) { return t.param(&p.value, &p.grad); };
  NetRefs r;
  r.conv1_w = bind(net.conv1_w);
  r.conv1_b = bind(net.conv1_b);
  r.conv2_w = bind(net.conv2_w);
  r.conv2_b = bind(net.conv2_b);
  r.fc_w = bind(net.fc_w);
  r.fc_b = bind(net.fc_b);
  for (auto& p : net.gat_w) r.gat_w.push_back(bind(p));
  for (auto& p : net.gat_a) r.gat_a.push_back(bind(p));
  r.actor_h_w = bind(net.actor_h_w);
  r.actor_h_b = bind(net.actor_h_b);
  r.actor_out_w = bind(net.actor_out_w);
  r.actor_out_b = bind(net.actor_out_b);
  r.critic_h_w = bind(net.critic_h_w);
  r.critic_h_b = bind(net.critic_h_b);
  r.critic_out_w = bind(net.critic_out_w);
  r.critic_out_b = bind(net.critic_out_b);
  return r;
}

inline Tensor observation_tensor(const Observation& obs) {
  Tensor t({obs.channels, kObsSize, kObsSize});
  t.v = obs.data;
  return t;
}

// conv(8) -> ReLU -> conv(16) -> ReLU -> flatten -> linear, producing the
// per-agent feature vector h.
inline Tape::Ref cnn_encode(Tape& t, const NetRefs& r, const NetConfig& cfg, Tape::Ref obs) {
  if (t.val(obs).shape != std::vector<int>{cfg.channels, kObsSize, kObsSize})
    throw std::invalid_argument("cnn_encode: observation shape does not match configured mode");
  Tape::Ref x = t.relu(t.conv2d(r.conv1_w, r.conv1_b, obs, PolicyNet::kStride));
  x = t.relu(t.conv2d(r.conv2_w, r.conv2_b, x, PolicyNet::kStride));
  return t.linear(r.fc_w, r.fc_b, x);
}

struct GatNeighbor {
  int id;
  Tape::Ref wh;  // W^m h_j for this head
};

namespace detail {
inline void sort_neighbors(std::vector<GatNeighbor>& neigh) {
  std::sort(neigh.begin(), neigh.end(),
            [](const GatNeighbor& a, const GatNeighbor& b) { return a.id < b.id; });
}
}  // namespace detail

// Softmax-normalized attention weights over the neighbors for one head.
// Neighbors are sorted by id before any floating-point work, so the result
// is bit-identical under permutations of the input list.
inline Tape::Ref gat_attention(Tape& t, Tape::Ref wh_self, std::vector<GatNeighbor> neigh,
                               Tape::Ref attn_vec, double slope) {
  if (neigh.empty()) throw std::invalid_argument("gat_attention: empty neighborhood");
  detail::sort_neighbors(neigh);
  std::vector<Tape::Ref> scores;
  scores.reserve(neigh.size());
  for (const GatNeighbor& nb : neigh)
    scores.push_back(t.leaky_relu(t.dot(attn_vec, t.concat(wh_self, nb.wh)), slope));
  return t.softmax(t.stack(scores));
}

// Attention-weighted sum of the neighbors' transformed features, in the same
// canonical id order as gat_attention.
inline Tape::Ref gat_aggregate(Tape& t, std::vector<GatNeighbor> neigh, Tape::Ref alpha) {
  if (neigh.empty()) throw std::invalid_argument("gat_aggregate: empty neighborhood");
  detail::sort_neighbors(neigh);
  std::vector<Tape::Ref> vecs;
  vecs.reserve(neigh.size());
  for (const GatNeighbor& nb : neigh) vecs.push_back(nb.wh);
  return t.weighted_sum(vecs, alpha);
}

struct JointForward {
  std::vector<Tape::Ref> h;        // per-agent encoder features
  std::vector<Tape::Ref> hprime;   // per-agent aggregated features
  std::vector<Tape::Ref> logits;   // per-agent action logits (5)
  std::vector<Tape::Ref> value;    // per-agent state value (scalar)
};

// Full joint pass for one timestep: encode every agent, exchange features
// through the attention layer (fully connected graph, self excluded), then
// run the weight-shared actor and critic heads on [h ; h']. A lone agent has
// no neighbors; its h' is the zero vector.
inline JointForward policy_forward(Tape& t, const NetRefs& r, const NetConfig& cfg,
                                   const std::vector<Tape::Ref>& observations) {
  const int n = static_cast<int>(observations.size());
  JointForward out;
  for (int i = 0; i < n; ++i) out.h.push_back(cnn_encode(t, r, cfg, observations[i]));

  const int M = cfg.heads;
  std::vector<std::vector<Tape::Ref>> wh(M);  // [head][agent]
  for (int m = 0; m < M; ++m)
    for (int i = 0; i < n; ++i) wh[m].push_back(t.matvec(r.gat_w[m], out.h[i]));

  for (int i = 0; i < n; ++i) {
    Tape::Ref agg = -1;
    if (n == 1) {
      agg = t.input(Tensor({cfg.feature_dim}));
    } else {
      bool first = true;
      for (int m = 0; m < M; ++m) {
        std::vector<GatNeighbor> neigh;
        for (int j = 0; j < n; ++j)
          if (j != i) neigh.push_back({j, wh[m][j]});
        const Tape::Ref alpha = gat_attention(t, wh[m][i], neigh, r.gat_a[m], cfg.leaky_slope);
        const Tape::Ref head_out = gat_aggregate(t, neigh, alpha);
        agg = first ? head_out : t.add(agg, head_out);
        first = false;
      }
      agg = t.scale(agg, 1.0 / M);
    }
    out.hprime.push_back(agg);

    const Tape::Ref cat = t.concat(out.h[i], out.hprime[i]);
    const Tape::Ref ah = t.relu(t.linear(r.actor_h_w, r.actor_h_b, cat));
    out.logits.push_back(t.linear(r.actor_out_w, r.actor_out_b, ah));
    const Tape::Ref ch = t.relu(t.linear(r.critic_h_w, r.critic_h_b, cat));
    out.value.push_back(t.linear(r.critic_out_w, r.critic_out_b, ch));
  }
  return out;
}

struct ActResult {
  std::vector<int> actions;
  std::vector<double> logp;     // log-probability of the chosen action
  std::vector<double> value;    // critic estimate
  std::vector<double> entropy;  // policy entropy at this state
};

// Forward-only evaluation used during rollouts and deployment. With
// greedy=true the action is the argmax logit (ties -> lowest index).
inline ActResult net_act(PolicyNet& net, const std::vector<Observation>& observations,
                         Rng& rng, bool greedy) {
  Tape t;
  const NetRefs refs = bind_params(t, net);
  std::vector<Tape::Ref> obs_refs;
  obs_refs.reserve(observations.size());
  for (const Observation& o : observations) obs_refs.push_back(t.input(observation_tensor(o)));
  const JointForward fwd = policy_forward(t, refs, net.cfg, obs_refs);

  ActResult out;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const Tape::Ref ls = t.log_softmax(fwd.logits[i]);
    const Tensor& lp = t.val(ls);
    int action = 0;
    if (greedy) {
      const Tensor& logits = t.val(fwd.logits[i]);
      for (int a = 1; a < kActionCount; ++a)
        if (logits[a] > logits[action]) action = a;
    } else {
      const double u = rng.uniform();
      double cum = 0.0;
      action = kActionCount - 1;
      for (int a = 0; a < kActionCount; ++a) {
        cum += std::exp(lp[a]);
        if (u < cum) {
          action = a;
          break;
        }
      }
    }
    double ent = 0.0;
    for (int a = 0; a < kActionCount; ++a) ent -= std::exp(lp[a]) * lp[a];
    out.actions.push_back(action);
    out.logp.push_back(lp[action]);
    out.value.push_back(t.val(fwd.value[i])[0]);
    out.entropy.push_back(ent);
  }
  return out;
}

}  // namespace vpm
