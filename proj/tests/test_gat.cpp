#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "vpm/nn.hpp"

using namespace vpm;
using ad::Tape;
using ad::Tensor;

namespace {
Tensor random_tensor(std::vector<int> shape, Rng& rng, double lim = 1.0) {
  Tensor t(std::move(shape));
  for (auto& x : t.v) x = rng.uniform(-lim, lim);
  return t;
}
}  // namespace

TEST_CASE("attention over a single neighbor is exactly one") {
  Rng rng(1);
  Tape t;
  const auto wh_i = t.input(random_tensor({6}, rng));
  const auto wh_j = t.input(random_tensor({6}, rng));
  const auto a = t.input(random_tensor({12}, rng));
  const auto alpha = gat_attention(t, wh_i, {{1, wh_j}}, a, 0.2);
  REQUIRE(t.val(alpha).size() == 1);
  REQUIRE(t.val(alpha)[0] == 1.0);
}

TEST_CASE("identical neighbors receive identical weights") {
  Rng rng(2);
  Tape t;
  const auto wh_i = t.input(random_tensor({6}, rng));
  const Tensor shared = random_tensor({6}, rng);
  const auto wh_j = t.input(shared);
  const auto wh_k = t.input(shared);
  const auto a = t.input(random_tensor({12}, rng));
  const auto alpha = gat_attention(t, wh_i, {{1, wh_j}, {2, wh_k}}, a, 0.2);
  REQUIRE(t.val(alpha)[0] == t.val(alpha)[1]);
}

TEST_CASE("attention rows sum to one") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tape t;
    const int n = rng.uniform_int(2, 7);
    const auto wh_i = t.input(random_tensor({5}, rng, 3.0));
    std::vector<GatNeighbor> neigh;
    for (int j = 0; j < n; ++j) neigh.push_back({j, t.input(random_tensor({5}, rng, 3.0))});
    const auto a = t.input(random_tensor({10}, rng, 2.0));
    const auto alpha = gat_attention(t, wh_i, neigh, a, 0.2);
    double sum = 0.0;
    for (double v : t.val(alpha).v) sum += v;
    REQUIRE(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("attention and aggregation ignore the input list order") {
  Rng rng(4);
  Tape t;
  const auto wh_i = t.input(random_tensor({6}, rng));
  std::vector<GatNeighbor> fwd;
  for (int j = 0; j < 5; ++j) fwd.push_back({j, t.input(random_tensor({6}, rng))});
  std::vector<GatNeighbor> rev(fwd.rbegin(), fwd.rend());
  std::vector<GatNeighbor> rot(fwd.begin() + 2, fwd.end());
  rot.insert(rot.end(), fwd.begin(), fwd.begin() + 2);
  const auto a = t.input(random_tensor({12}, rng));

  const auto alpha_f = gat_attention(t, wh_i, fwd, a, 0.2);
  const auto alpha_r = gat_attention(t, wh_i, rev, a, 0.2);
  const auto alpha_t = gat_attention(t, wh_i, rot, a, 0.2);
  REQUIRE(t.val(alpha_f).v == t.val(alpha_r).v);  // bit-identical
  REQUIRE(t.val(alpha_f).v == t.val(alpha_t).v);

  const auto agg_f = gat_aggregate(t, fwd, alpha_f);
  const auto agg_r = gat_aggregate(t, rev, alpha_f);
  const auto agg_t = gat_aggregate(t, rot, alpha_f);
  REQUIRE(t.val(agg_f).v == t.val(agg_r).v);
  REQUIRE(t.val(agg_f).v == t.val(agg_t).v);
}

TEST_CASE("aggregation is linear in the neighbors") {
  Rng rng(5);
  Tape t;
  // all-zero neighbors aggregate to zero
  std::vector<GatNeighbor> zeros{{0, t.input(Tensor({4}))}, {1, t.input(Tensor({4}))}};
  const auto alpha = t.input(Tensor::vec({0.25, 0.75}));
  const auto agg = gat_aggregate(t, zeros, alpha);
  for (double v : t.val(agg).v) REQUIRE(v == 0.0);
}

TEST_CASE("one neighbor aggregates to the head average of W h_j") {
  NetConfig cfg;
  cfg.channels = 1;
  cfg.feature_dim = 5;
  cfg.heads = 3;
  cfg.head_hidden = 4;
  Rng rng(6);
  PolicyNet net = make_policy_net(cfg, rng);

  Tape t;
  const NetRefs refs = bind_params(t, net);
  std::vector<Tape::Ref> obs{t.input(random_tensor({1, kObsSize, kObsSize}, rng)),
                             t.input(random_tensor({1, kObsSize, kObsSize}, rng))};
  const JointForward fwd = policy_forward(t, refs, cfg, obs);

  // agent 0 has exactly one neighbor (agent 1): h'_0 = (1/M) sum_m W^m h_1
  Tensor expected({cfg.feature_dim});
  for (int m = 0; m < cfg.heads; ++m) {
    const Tensor& W = net.gat_w[m].value;
    const Tensor& h1 = t.val(fwd.h[1]);
    for (int r = 0; r < cfg.feature_dim; ++r) {
      double s = 0.0;
      for (int c = 0; c < cfg.feature_dim; ++c) s += W.v[r * cfg.feature_dim + c] * h1[c];
      expected[r] += s;
    }
  }
  for (int r = 0; r < cfg.feature_dim; ++r) expected[r] /= cfg.heads;
  for (int r = 0; r < cfg.feature_dim; ++r)
    REQUIRE_THAT(t.val(fwd.hprime[0])[r],
                 Catch::Matchers::WithinAbs(expected[r], 1e-12));
}

TEST_CASE("a lone agent aggregates to zero") {
  NetConfig cfg;
  cfg.channels = 1;
  cfg.feature_dim = 5;
  cfg.heads = 2;
  cfg.head_hidden = 4;
  Rng rng(7);
  PolicyNet net = make_policy_net(cfg, rng);
  Tape t;
  const NetRefs refs = bind_params(t, net);
  const JointForward fwd =
      policy_forward(t, refs, cfg, {t.input(random_tensor({1, kObsSize, kObsSize}, rng))});
  for (double v : t.val(fwd.hprime[0]).v) REQUIRE(v == 0.0);
}

TEST_CASE("zero-initialized heads give a uniform policy and bias value") {
  NetConfig cfg;
  cfg.channels = 1;
  cfg.feature_dim = 6;
  cfg.heads = 2;
  cfg.head_hidden = 4;
  Rng rng(8);
  PolicyNet net = make_policy_net(cfg, rng);  // output layers start at zero

  Tape t;
  const NetRefs refs = bind_params(t, net);
  const JointForward fwd =
      policy_forward(t, refs, cfg, {t.input(random_tensor({1, kObsSize, kObsSize}, rng))});
  const Tensor& logits = t.val(fwd.logits[0]);
  for (int a2 = 1; a2 < kActionCount; ++a2) REQUIRE(logits[a2] == logits[0]);
  const auto probs = t.softmax(fwd.logits[0]);
  double sum = 0.0;
  for (double p : t.val(probs).v) {
    REQUIRE_THAT(p, Catch::Matchers::WithinAbs(0.2, 1e-12));
    sum += p;
  }
  REQUIRE(std::abs(sum - 1.0) < 1e-6);
  REQUIRE(t.val(fwd.value[0])[0] == net.critic_out_b.value[0]);
}

TEST_CASE("gat attention and aggregation gradients match finite differences") {
  Rng rng(9);
  for (int inst = 0; inst < 5; ++inst) {
    const int F = 4, n = 3;
    Tensor W = random_tensor({F, F}, rng), Wg(W.shape);
    Tensor a = random_tensor({2 * F}, rng), ag(a.shape);
    std::vector<Tensor> h(n);
    std::vector<Tensor> hg(n);
    for (int j = 0; j < n; ++j) {
      h[j] = random_tensor({F}, rng);
      hg[j] = Tensor(h[j].shape);
    }
    Tensor probe = random_tensor({F}, rng);  // fixed projection for a scalar loss

    auto build = [&](Tape& t) {
      const auto Wr = t.param(&W, &Wg);
      const auto ar = t.param(&a, &ag);
      std::vector<Tape::Ref> wh;
      for (int j = 0; j < n; ++j) wh.push_back(t.matvec(Wr, t.param(&h[j], &hg[j])));
      std::vector<GatNeighbor> neigh{{1, wh[1]}, {2, wh[2]}};
      const auto alpha = gat_attention(t, wh[0], neigh, ar, 0.2);
      const auto agg = gat_aggregate(t, neigh, alpha);
      return t.dot(agg, t.input(probe));
    };
    auto loss_fn = [&]() {
      Tape t;
      return t.val(build(t))[0];
    };
    Wg = Tensor(W.shape);
    ag = Tensor(a.shape);
    for (int j = 0; j < n; ++j) hg[j] = Tensor(h[j].shape);
    {
      Tape t;
      t.backward(build(t));
    }
    std::vector<Tensor*> params{&W, &a};
    std::vector<const Tensor*> grads{&Wg, &ag};
    for (int j = 0; j < n; ++j) {
      params.push_back(&h[j]);
      grads.push_back(&hg[j]);
    }
    REQUIRE(oracle::max_grad_rel_error(params, grads, loss_fn) < 1e-4);
  }
}

TEST_CASE("actor and critic head gradients match finite differences") {
  NetConfig cfg;
  cfg.channels = 1;
  cfg.feature_dim = 4;
  cfg.heads = 1;
  cfg.head_hidden = 3;
  Rng rng(10);
  PolicyNet net = make_policy_net(cfg, rng);
  // give the zero-initialized output layers nonzero values for the check
  for (auto& x : net.actor_out_w.value.v) x = rng.uniform(-0.5, 0.5);
  for (auto& x : net.critic_out_w.value.v) x = rng.uniform(-0.5, 0.5);

  const Tensor obs = random_tensor({1, kObsSize, kObsSize}, rng, 0.5);
  auto build = [&](Tape& t) {
    const NetRefs refs = bind_params(t, net);
    const JointForward fwd = policy_forward(t, refs, cfg, {t.input(obs)});
    return t.add(t.pick(t.log_softmax(fwd.logits[0]), 2),
                 t.mul(fwd.value[0], fwd.value[0]));
  };
  auto loss_fn = [&]() {
    Tape t;
    return t.val(build(t))[0];
  };
  net.zero_grads();
  {
    Tape t;
    t.backward(build(t));
  }
  std::vector<Tensor*> params;
  std::vector<const Tensor*> grads;
  for (auto& [name, p] : net.named_params()) {
    if (name.rfind("actor", 0) == 0 || name.rfind("critic", 0) == 0) {
      params.push_back(&p->value);
      grads.push_back(&p->grad);
    }
  }
  REQUIRE(oracle::max_grad_rel_error(params, grads, loss_fn) < 1e-4);
}

TEST_CASE("empty neighborhoods are rejected at the op level") {
  Tape t;
  const auto wh = t.input(Tensor::vec({1.0, 2.0}));
  const auto a = t.input(Tensor::vec({1.0, 2.0, 3.0, 4.0}));
  REQUIRE_THROWS_AS(gat_attention(t, wh, {}, a, 0.2), std::invalid_argument);
  REQUIRE_THROWS_AS(gat_aggregate(t, {}, wh), std::invalid_argument);
}
