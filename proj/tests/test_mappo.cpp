#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cfes/baselines.hpp"
#include "cfes/mappo.hpp"

using namespace cfes;

namespace {

// Explicit-sum oracle: A_t = sum_i (gamma*psi)^i * delta_{t+i}.
std::vector<double> gae_oracle(const std::vector<double>& r,
                               const std::vector<double>& v, double bootstrap,
                               double gamma, double psi) {
  const std::size_t T = r.size();
  std::vector<double> adv(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double acc = 0.0, w = 1.0;
    for (std::size_t i = t; i < T; ++i) {
      double next_v = (i + 1 < T) ? v[i + 1] : bootstrap;
      acc += w * (r[i] + gamma * next_v - v[i]);
      w *= gamma * psi;
    }
    adv[t] = acc;
  }
  return adv;
}

ScenarioConfig tiny_cfg() {
  ScenarioConfig c;
  c.num_aps = 4;
  c.grid_rows = 2;
  c.grid_cols = 2;
  c.neighbor_count = 2;
  c.episode_length = 2.0;
  c.traffic.peak_density = 80.0;
  c.traffic.trough_density = 20.0;
  c.rng_seed = 5;
  c.rl.episodes = 2;
  c.rl.rollout_length = 8;
  c.rl.train_episode_steps = 8;
  c.rl.ppo_epochs = 2;
  c.rl.minibatches = 2;
  c.rl.actor_hidden = {16};
  c.rl.critic_hidden = {16};
  validate(c);
  return c;
}

struct HoldPolicy : Policy {
  std::string name() const override { return "hold"; }
  JointAction act(const Environment& env, const std::vector<std::vector<double>>&,
                  Rng&) override {
    return JointAction(static_cast<std::size_t>(env.num_aps()), ApAction{0, 0});
  }
};

}  // namespace

TEST_CASE("gae recursion matches the explicit discounted sum") {
  Rng rng = make_rng(1, "test-gae");
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> r(17), v(17);
    for (double& x : r) x = u(rng);
    for (double& x : v) x = u(rng);
    double boot = u(rng);
    auto [adv, ret] = compute_gae(r, v, boot, 0.99, 0.95);
    auto oracle = gae_oracle(r, v, boot, 0.99, 0.95);
    for (std::size_t t = 0; t < r.size(); ++t) {
      CHECK(std::abs(adv[t] - oracle[t]) < 1e-12);
      CHECK(ret[t] == doctest::Approx(adv[t] + v[t]).epsilon(1e-14));
    }
  }
}

TEST_CASE("gae degenerate settings reduce to known forms") {
  std::vector<double> r = {1.0, 2.0, 3.0};
  std::vector<double> v = {0.5, -0.5, 0.25};
  double boot = 2.0;
  // psi = 0: pure one-step TD errors.
  auto [adv0, ret0] = compute_gae(r, v, boot, 0.9, 0.0);
  CHECK(adv0[0] == doctest::Approx(1.0 + 0.9 * -0.5 - 0.5));
  CHECK(adv0[2] == doctest::Approx(3.0 + 0.9 * 2.0 - 0.25));
  // psi = 1: full discounted return minus the value baseline.
  auto [adv1, ret1] = compute_gae(r, v, boot, 0.9, 1.0);
  double g2 = 3.0 + 0.9 * boot;
  double g1 = 2.0 + 0.9 * g2;
  double g0 = 1.0 + 0.9 * g1;
  CHECK(adv1[0] == doctest::Approx(g0 - v[0]).epsilon(1e-12));
  CHECK(ret1[0] == doctest::Approx(g0).epsilon(1e-12));
  // Empty rollout is a no-op.
  auto [adve, rete] = compute_gae({}, {}, 0.0, 0.9, 0.5);
  CHECK(adve.empty());
  CHECK(rete.empty());
}

TEST_CASE("huber loss is quadratic inside the band, linear outside") {
  CHECK(huber(0.0, 10.0) == 0.0);
  CHECK(huber(1.0, 10.0) == doctest::Approx(0.5));
  CHECK(huber(-3.0, 10.0) == doctest::Approx(4.5));
  CHECK(huber(10.0, 10.0) == doctest::Approx(50.0));
  CHECK(huber(20.0, 10.0) == doctest::Approx(10.0 * (20.0 - 5.0)));
  // Continuity and gradient clamping at the band edge.
  CHECK(huber(10.0 + 1e-9, 10.0) == doctest::Approx(huber(10.0, 10.0)));
  CHECK(huber_grad(3.0, 10.0) == doctest::Approx(3.0));
  CHECK(huber_grad(25.0, 10.0) == doctest::Approx(10.0));
  CHECK(huber_grad(-25.0, 10.0) == doctest::Approx(-10.0));

  CHECK(value_loss({1.0, 2.0}, {0.0, 0.0}, 10.0) ==
        doctest::Approx(0.5 * (0.5 + 2.0)));
}

TEST_CASE("clipped surrogate point values") {
  double ce = 0.01;
  // Unit ratio: objective is the advantage plus the entropy bonus.
  CHECK(policy_objective({2.0}, {-1.0}, {-1.0}, {0.7}, 0.2, ce) ==
        doctest::Approx(2.0 + ce * 0.7));
  // Large ratio with positive advantage clips at (1 + eps) * A.
  double big = std::log(3.0);
  CHECK(policy_objective({1.0}, {-1.0}, {-1.0 + big}, {0.0}, 0.2, ce) ==
        doctest::Approx(1.2));
  // Large ratio with negative advantage keeps the pessimistic branch.
  CHECK(policy_objective({-1.0}, {-1.0}, {-1.0 + big}, {0.0}, 0.2, ce) ==
        doctest::Approx(-3.0));
  // Tiny ratio with positive advantage is not clipped from below.
  double small = std::log(0.1);
  CHECK(policy_objective({1.0}, {-1.0}, {-1.0 + small}, {0.0}, 0.2, ce) ==
        doctest::Approx(0.1));
  CHECK_THROWS_AS(policy_objective({1.0}, {-1.0}, {5000.0}, {0.0}, 0.2, ce),
                  TrainError);
}

TEST_CASE("advantage normalization centers and scales") {
  std::vector<double> adv = {1.0, 2.0, 3.0, 4.0, 10.0};
  normalize_advantages(adv);
  double mean = 0.0, var = 0.0;
  for (double a : adv) mean += a;
  mean /= adv.size();
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= adv.size();
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-6));

  std::vector<double> flat = {2.5, 2.5, 2.5};
  normalize_advantages(flat);
  for (double a : flat) CHECK(a == doctest::Approx(0.0));
}

TEST_CASE("policy gradients match finite differences of the surrogate") {
  Rng rng = make_rng(2, "test-pgrad");
  const int obs_dim = 4;
  Mlp actor = make_mlp(obs_dim, {8}, kPolicyLogits, rng, 0.1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  TrajectoryBuffer buf;
  buf.num_agents = 2;
  const int T = 3;
  std::vector<std::pair<int, int>> samples;
  for (int t = 0; t < T; ++t) {
    std::vector<std::vector<double>> obs_t;
    std::vector<int> aa, as;
    std::vector<double> lp;
    for (int l = 0; l < 2; ++l) {
      std::vector<double> o(obs_dim);
      for (double& x : o) x = u(rng);
      std::vector<double> logits = forward(actor, o);
      PolicySample s = sample_policy(logits, rng);
      obs_t.push_back(std::move(o));
      aa.push_back(s.antenna_idx);
      as.push_back(s.sleep_idx);
      lp.push_back(s.logprob);  // ratio starts at 1: inside the clip band
      samples.emplace_back(t, l);
    }
    buf.obs.push_back(std::move(obs_t));
    buf.act_antenna.push_back(std::move(aa));
    buf.act_sleep.push_back(std::move(as));
    buf.old_logp.push_back(std::move(lp));
    buf.advantages.push_back(u(rng));
  }

  const double clip = 0.2, ce = 0.01;
  auto objective = [&]() {
    double acc = 0.0;
    for (const auto& [t, l] : samples) {
      std::vector<double> logits = forward(actor, buf.obs[t][l]);
      PolicyEval pe = eval_policy(logits, buf.act_antenna[t][l],
                                  buf.act_sleep[t][l]);
      double r = std::exp(pe.logprob - buf.old_logp[t][l]);
      double cl = std::clamp(r, 1.0 - clip, 1.0 + clip);
      double a = buf.advantages[t];
      acc += std::min(r * a, cl * a) + ce * pe.entropy;
    }
    return acc / static_cast<double>(samples.size());
  };

  MlpGrads grads = make_grads(actor);
  PolicyGradStats st =
      accumulate_policy_grads(actor, buf, samples, clip, ce, grads);
  CHECK(st.objective == doctest::Approx(objective()).epsilon(1e-10));

  // Grads hold the *negated* objective gradient.
  const double h = 1e-6;
  for (std::size_t li = 0; li < actor.layers.size(); ++li) {
    Linear& l = actor.layers[li];
    for (std::size_t j = 0; j < l.w.size(); j += 5) {
      double orig = l.w[j];
      l.w[j] = orig + h;
      double fu = objective();
      l.w[j] = orig - h;
      double fd = objective();
      l.w[j] = orig;
      double num = (fu - fd) / (2.0 * h);
      CHECK(grads.layers[li].w[j] == doctest::Approx(-num).epsilon(1e-4));
    }
  }
}

TEST_CASE("value gradients match finite differences of the huber loss") {
  Rng rng = make_rng(3, "test-vgrad");
  const int gs_dim = 5;
  Mlp critic = make_mlp(gs_dim, {8}, 1, rng, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  TrajectoryBuffer buf;
  std::vector<int> steps = {0, 1, 2, 3};
  for (int t = 0; t < 4; ++t) {
    std::vector<double> gs(gs_dim);
    for (double& x : gs) x = u(rng);
    buf.global_state.push_back(std::move(gs));
    buf.returns.push_back(5.0 * u(rng));
  }

  auto loss = [&]() {
    double acc = 0.0;
    for (int t : steps) {
      double v = forward(critic, buf.global_state[t])[0];
      acc += huber(v - buf.returns[t], 10.0);
    }
    return acc / static_cast<double>(steps.size());
  };

  MlpGrads grads = make_grads(critic);
  double reported = accumulate_value_grads(critic, buf, steps, 10.0, grads);
  CHECK(reported == doctest::Approx(loss()).epsilon(1e-12));

  const double h = 1e-6;
  for (std::size_t li = 0; li < critic.layers.size(); ++li) {
    Linear& l = critic.layers[li];
    for (std::size_t j = 0; j < l.w.size(); j += 7) {
      double orig = l.w[j];
      l.w[j] = orig + h;
      double fu = loss();
      l.w[j] = orig - h;
      double fd = loss();
      l.w[j] = orig;
      CHECK(grads.layers[li].w[j] ==
            doctest::Approx((fu - fd) / (2.0 * h)).epsilon(1e-4));
    }
  }
}

TEST_CASE("training runs, counts timesteps, and is seed-deterministic") {
  ScenarioConfig cfg = tiny_cfg();
  MappoTrainer t1(cfg, 11);
  int iters = 0;
  std::uint64_t last_ts = 0;
  t1.train([&](const IterationStats& st) {
    ++iters;
    CHECK(std::isfinite(st.policy_objective));
    CHECK(std::isfinite(st.value_loss));
    CHECK(st.value_loss >= 0.0);
    CHECK(st.entropy >= 0.0);
    last_ts = st.env_timesteps;
  });
  CHECK(iters >= 2);
  // 2 episodes x 8 decision steps x 20 timesteps each.
  CHECK(last_ts == 2u * 8u * 20u);

  MappoTrainer t2(cfg, 11);
  t2.train([](const IterationStats&) {});
  for (std::size_t li = 0; li < t1.actor().layers.size(); ++li) {
    CHECK(t1.actor().layers[li].w == t2.actor().layers[li].w);
  }

  MappoTrainer t3(cfg, 12);
  t3.train([](const IterationStats&) {});
  CHECK(t1.actor().layers[0].w != t3.actor().layers[0].w);
}

TEST_CASE("resume rejects incompatible checkpoint shapes") {
  ScenarioConfig cfg = tiny_cfg();
  MappoTrainer t(cfg, 11);
  Rng rng = make_rng(1, "test-resume");
  Mlp wrong = make_mlp(3, {4}, kPolicyLogits, rng);
  CHECK_THROWS_AS(t.load_nets(wrong, t.critic()), TrainError);
  // Matching shapes are accepted and copied through.
  Mlp same_a = t.actor();
  same_a.layers[0].w[0] += 1.0;
  t.load_nets(same_a, t.critic());
  CHECK(t.actor().layers[0].w[0] == same_a.layers[0].w[0]);
}

TEST_CASE("evaluation aggregates are consistent and paired across policies") {
  ScenarioConfig cfg = tiny_cfg();
  HoldPolicy hold;
  int sink_calls = 0;
  EvalSummary s = evaluate_policy(hold, cfg, 2,
                                  [&](int, const StepInfo&) { ++sink_calls; },
                                  5);
  // 2 episodes x 100 decision steps (2 s / 20 ms), every 5th row traced.
  CHECK(sink_calls == 2 * 100 / 5);
  CHECK(s.episodes == 2);
  CHECK(s.mean_pnet > 0.0);
  CHECK(s.mean_pnet ==
        doctest::Approx(s.mean_ap_power + s.mean_cloud_power).epsilon(1e-9));
  double mode_total = 0.0;
  for (double f : s.mode_fraction) mode_total += f;
  CHECK(mode_total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.mode_fraction[0] == doctest::Approx(1.0));  // hold never sleeps

  EvalSummary again = evaluate_policy(hold, cfg, 2);
  CHECK(again.mean_pnet == s.mean_pnet);
  CHECK(again.mean_drop == s.mean_drop);
}
