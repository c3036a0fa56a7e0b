#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cfes/env.hpp"
#include "cfes/nn.hpp"
#include "cfes/policy.hpp"

namespace cfes {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- advantage estimation ---------------------------------------------------

// Backward GAE recursion: A_t = d_t + gamma*psi*A_{t+1},
// d_t = r_t + gamma*V_{t+1} - V_t, bootstrapped past the rollout end.
// Returns (advantages, returns) with returns = A + V.
inline std::pair<std::vector<double>, std::vector<double>> compute_gae(
    const std::vector<double>& rewards, const std::vector<double>& values,
    double bootstrap, double gamma, double psi) {
  const std::size_t T = rewards.size();
  std::vector<double> adv(T, 0.0), ret(T, 0.0);
  double next_adv = 0.0;
  double next_value = bootstrap;
  for (std::size_t i = T; i-- > 0;) {
    double delta = rewards[i] + gamma * next_value - values[i];
    next_adv = delta + gamma * psi * next_adv;
    adv[i] = next_adv;
    next_value = values[i];
    ret[i] = adv[i] + values[i];
  }
  return {std::move(adv), std::move(ret)};
}

// --- losses ------------------------------------------------------------------

inline double huber(double e, double delta) {
  double a = std::abs(e);
  if (a <= delta) return 0.5 * e * e;
  return delta * (a - 0.5 * delta);
}

inline double huber_grad(double e, double delta) {
  return std::clamp(e, -delta, delta);
}

inline double value_loss(const std::vector<double>& values_pred,
                         const std::vector<double>& returns, double delta) {
  double acc = 0.0;
  for (std::size_t i = 0; i < values_pred.size(); ++i)
    acc += huber(values_pred[i] - returns[i], delta);
  return acc / static_cast<double>(values_pred.size());
}

// Clipped surrogate (maximized): mean over the batch of
// min(r*A, clip(r)*A) + c_e * H.
inline double policy_objective(const std::vector<double>& advantages,
                               const std::vector<double>& old_logp,
                               const std::vector<double>& new_logp,
                               const std::vector<double>& entropies,
                               double clip_eps, double entropy_coef) {
  double acc = 0.0;
  const std::size_t n = advantages.size();
  for (std::size_t i = 0; i < n; ++i) {
    double r = std::exp(new_logp[i] - old_logp[i]);
    if (!std::isfinite(r)) throw TrainError("policy_objective: non-finite ratio");
    double clipped = std::clamp(r, 1.0 - clip_eps, 1.0 + clip_eps);
    acc += std::min(r * advantages[i], clipped * advantages[i]) +
           entropy_coef * entropies[i];
  }
  return acc / static_cast<double>(n);
}

// --- rollout storage ----------------------------------------------------------

struct TrajectoryBuffer {
  int num_agents = 0;
  std::vector<std::vector<std::vector<double>>> obs;  // [T][L][obs_dim]
  std::vector<std::vector<int>> act_antenna;          // [T][L]
  std::vector<std::vector<int>> act_sleep;            // [T][L]
  std::vector<std::vector<double>> old_logp;          // [T][L]
  std::vector<std::vector<double>> global_state;      // [T][gs_dim]
  std::vector<double> rewards;                        // [T]
  std::vector<double> values;                         // [T]
  double bootstrap_value = 0.0;
  std::vector<double> advantages;  // [T], shared across agents
  std::vector<double> returns;     // [T]

  std::size_t size() const { return rewards.size(); }
  void clear() {
    obs.clear();
    act_antenna.clear();
    act_sleep.clear();
    old_logp.clear();
    global_state.clear();
    rewards.clear();
    values.clear();
    advantages.clear();
    returns.clear();
  }
};

inline void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  double mean = std::accumulate(adv.begin(), adv.end(), 0.0) /
                static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= static_cast<double>(adv.size());
  double sd = std::sqrt(var) + 1e-8;
  for (double& a : adv) a = (a - mean) / sd;
}

// --- gradient assembly --------------------------------------------------------

struct PolicyGradStats {
  double objective = 0.0;
  double entropy = 0.0;
};

// Accumulates actor gradients of the *negated* clipped surrogate over the
// sample set (pairs of rollout step and agent). Each sample contributes
// 1/n of the batch mean.
inline PolicyGradStats accumulate_policy_grads(
    const Mlp& actor, const TrajectoryBuffer& buf,
    const std::vector<std::pair<int, int>>& samples, double clip_eps,
    double entropy_coef, MlpGrads& grads) {
  PolicyGradStats stats;
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  ForwardCache cache;
  for (const auto& [t, l] : samples) {
    const std::vector<double>& o = buf.obs[static_cast<std::size_t>(t)]
                                          [static_cast<std::size_t>(l)];
    std::vector<double> logits = forward(actor, o, &cache);
    const int ai = buf.act_antenna[static_cast<std::size_t>(t)]
                                  [static_cast<std::size_t>(l)];
    const int si = buf.act_sleep[static_cast<std::size_t>(t)]
                                [static_cast<std::size_t>(l)];
    PolicyEval pe = eval_policy(logits, ai, si);
    const double old_lp = buf.old_logp[static_cast<std::size_t>(t)]
                                      [static_cast<std::size_t>(l)];
    const double adv = buf.advantages[static_cast<std::size_t>(t)];
    double ratio = std::exp(pe.logprob - old_lp);
    if (!std::isfinite(ratio)) throw TrainError("update: non-finite ratio");
    double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    double surr = std::min(ratio * adv, clipped * adv);
    stats.objective += (surr + entropy_coef * pe.entropy) * inv_n;
    stats.entropy += pe.entropy * inv_n;

    // d surr / d logprob: active only when the unclipped branch is selected.
    bool unclipped_active = ratio * adv <= clipped * adv;
    double dlogp = unclipped_active ? ratio * adv : 0.0;

    std::vector<double> dlogits(static_cast<std::size_t>(kPolicyLogits), 0.0);
    std::vector<double> pa = softmax(logits.data(), kAntennaChoices);
    std::vector<double> ps =
        softmax(logits.data() + kAntennaChoices, kSleepChoices);
    double ha = 0.0, hs = 0.0;
    for (double p : pa)
      if (p > 0.0) ha -= p * std::log(p);
    for (double p : ps)
      if (p > 0.0) hs -= p * std::log(p);
    for (int i = 0; i < kAntennaChoices; ++i) {
      double p = pa[static_cast<std::size_t>(i)];
      double dlp = (i == ai ? 1.0 : 0.0) - p;
      double dent = -p * (std::log(std::max(p, 1e-300)) + ha);
      // maximize => accumulate negative gradient
      dlogits[static_cast<std::size_t>(i)] =
          -(dlogp * dlp + entropy_coef * dent) * inv_n;
    }
    for (int i = 0; i < kSleepChoices; ++i) {
      double p = ps[static_cast<std::size_t>(i)];
      double dlp = (i == si ? 1.0 : 0.0) - p;
      double dent = -p * (std::log(std::max(p, 1e-300)) + hs);
      dlogits[static_cast<std::size_t>(kAntennaChoices + i)] =
          -(dlogp * dlp + entropy_coef * dent) * inv_n;
    }
    backward(actor, cache, dlogits, grads);
  }
  return stats;
}

// Critic gradients of the mean Huber loss against returns.
inline double accumulate_value_grads(const Mlp& critic,
                                     const TrajectoryBuffer& buf,
                                     const std::vector<int>& steps,
                                     double huber_delta, MlpGrads& grads) {
  const double inv_n = 1.0 / static_cast<double>(steps.size());
  double loss = 0.0;
  ForwardCache cache;
  for (int t : steps) {
    std::vector<double> v =
        forward(critic, buf.global_state[static_cast<std::size_t>(t)], &cache);
    double e = v[0] - buf.returns[static_cast<std::size_t>(t)];
    loss += huber(e, huber_delta) * inv_n;
    std::vector<double> dv{huber_grad(e, huber_delta) * inv_n};
    backward(critic, cache, dv, grads);
  }
  return loss;
}

// --- training loop -------------------------------------------------------------

struct IterationStats {
  int iteration = 0;
  std::uint64_t env_timesteps = 0;
  double mean_reward = 0.0;  // per decision step
  double entropy = 0.0;
  double policy_objective = 0.0;
  double value_loss = 0.0;
  double mean_pnet = 0.0;
  double drop_ratio = 0.0;
};

class MappoTrainer {
 public:
  MappoTrainer(const ScenarioConfig& cfg, std::uint64_t training_seed)
      : cfg_(cfg),
        env_(cfg),
        policy_rng_(make_rng(training_seed, "mappo-policy")),
        update_rng_(make_rng(training_seed, "mappo-update")),
        phase_rng_(make_rng(training_seed, "mappo-phase")) {
    Rng init_rng = make_rng(training_seed, "mappo-init");
    Environment probe(cfg);
    actor_ = make_mlp(probe.observation_width(), cfg.rl.actor_hidden,
                      kPolicyLogits, init_rng);
    critic_ = make_mlp(probe.global_state_width(), cfg.rl.critic_hidden, 1,
                       init_rng);
    actor_adam_ = make_adam(actor_);
    critic_adam_ = make_adam(critic_);
    reset_episode();
  }

  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }
  Mlp& actor_mutable() { return actor_; }

  // Resume support: optimizer moments restart from zero.
  void load_nets(const Mlp& actor, const Mlp& critic) {
    if (actor.input_width() != actor_.input_width() ||
        actor.output_width() != actor_.output_width() ||
        critic.input_width() != critic_.input_width())
      throw TrainError("resume: checkpoint shapes incompatible with config");
    actor_ = actor;
    critic_ = critic;
    actor_adam_ = make_adam(actor_);
    critic_adam_ = make_adam(critic_);
  }

  using IterCallback = std::function<void(const IterationStats&)>;

  // Runs iterations until the episode budget is exhausted. Each training
  // episode spans train_episode_steps decision steps at a random profile
  // phase so rollouts cover the whole diurnal range.
  void train(const IterCallback& on_iteration) {
    int iteration = 0;
    while (episodes_done_ < cfg_.rl.episodes) {
      ++iteration;
      TrajectoryBuffer buf = collect_rollout();
      if (buf.size() == 0) break;
      IterationStats st = update(buf);
      st.iteration = iteration;
      st.env_timesteps = env_timesteps_;
      st.mean_reward = rollout_reward_mean_;
      st.mean_pnet = rollout_pnet_mean_;
      st.drop_ratio = rollout_drop_;
      if (!std::isfinite(st.policy_objective) || !std::isfinite(st.value_loss))
        throw TrainError("training diverged: non-finite loss at iteration " +
                         std::to_string(iteration));
      if (on_iteration) on_iteration(st);
    }
  }

  TrajectoryBuffer collect_rollout() {
    TrajectoryBuffer buf;
    buf.num_agents = cfg_.num_aps;
    const int T = cfg_.rl.rollout_length;
    double reward_acc = 0.0, pnet_acc = 0.0;
    for (int t = 0; t < T; ++t) {
      if (episode_steps_ >= cfg_.rl.train_episode_steps || env_.done()) {
        ++episodes_done_;
        if (episodes_done_ >= cfg_.rl.episodes) break;
        reset_episode();
      }
      std::vector<std::vector<double>> obs = env_.observe_all();
      std::vector<double> gs = env_.global_state();
      std::vector<int> aa(static_cast<std::size_t>(cfg_.num_aps));
      std::vector<int> as(static_cast<std::size_t>(cfg_.num_aps));
      std::vector<double> lp(static_cast<std::size_t>(cfg_.num_aps));
      JointAction action(static_cast<std::size_t>(cfg_.num_aps));
      for (int l = 0; l < cfg_.num_aps; ++l) {
        std::vector<double> logits =
            forward(actor_, obs[static_cast<std::size_t>(l)]);
        PolicySample s = sample_policy(logits, policy_rng_);
        aa[static_cast<std::size_t>(l)] = s.antenna_idx;
        as[static_cast<std::size_t>(l)] = s.sleep_idx;
        lp[static_cast<std::size_t>(l)] = s.logprob;
        action[static_cast<std::size_t>(l)].antenna_delta =
            antenna_delta_from_index(s.antenna_idx);
        action[static_cast<std::size_t>(l)].sleep_choice = s.sleep_idx;
      }
      double value = forward(critic_, gs)[0];
      StepResult res = env_.step(action);
      ++episode_steps_;
      env_timesteps_ += static_cast<std::uint64_t>(cfg_.decision_period);

      buf.obs.push_back(std::move(obs));
      buf.global_state.push_back(std::move(gs));
      buf.act_antenna.push_back(std::move(aa));
      buf.act_sleep.push_back(std::move(as));
      buf.old_logp.push_back(std::move(lp));
      buf.rewards.push_back(res.reward);
      buf.values.push_back(value);
      reward_acc += res.reward;
      pnet_acc += res.info.pnet_mean;
    }
    if (buf.size() == 0) return buf;  // episode budget exhausted
    buf.bootstrap_value = forward(critic_, env_.global_state())[0];
    auto [adv, ret] = compute_gae(buf.rewards, buf.values, buf.bootstrap_value,
                                  cfg_.rl.gamma, cfg_.rl.gae_lambda);
    buf.advantages = std::move(adv);
    buf.returns = std::move(ret);
    normalize_advantages(buf.advantages);
    rollout_reward_mean_ = reward_acc / static_cast<double>(buf.size());
    rollout_pnet_mean_ = pnet_acc / static_cast<double>(buf.size());
    rollout_drop_ = env_.ledger().mean_drop();
    return buf;
  }

  IterationStats update(const TrajectoryBuffer& buf) {
    IterationStats st;
    const int T = static_cast<int>(buf.size());
    std::vector<std::pair<int, int>> samples;
    samples.reserve(static_cast<std::size_t>(T) * buf.num_agents);
    for (int t = 0; t < T; ++t)
      for (int l = 0; l < buf.num_agents; ++l) samples.emplace_back(t, l);
    std::vector<int> steps(static_cast<std::size_t>(T));
    std::iota(steps.begin(), steps.end(), 0);

    MlpGrads actor_grads = make_grads(actor_);
    MlpGrads critic_grads = make_grads(critic_);
    double obj_acc = 0.0, ent_acc = 0.0, vloss_acc = 0.0;
    int chunks = 0;
    for (int epoch = 0; epoch < cfg_.rl.ppo_epochs; ++epoch) {
      std::shuffle(samples.begin(), samples.end(), update_rng_);
      std::shuffle(steps.begin(), steps.end(), update_rng_);
      const int nb = std::max(1, cfg_.rl.minibatches);
      for (int b = 0; b < nb; ++b) {
        auto lo_s = samples.begin() + b * static_cast<long>(samples.size()) / nb;
        auto hi_s =
            samples.begin() + (b + 1) * static_cast<long>(samples.size()) / nb;
        if (lo_s == hi_s) continue;
        std::vector<std::pair<int, int>> mb(lo_s, hi_s);
        actor_grads.zero();
        PolicyGradStats pg = accumulate_policy_grads(
            actor_, buf, mb, cfg_.rl.clip_eps, cfg_.rl.entropy_coef, actor_grads);
        clip_grad_norm(actor_grads, cfg_.rl.grad_clip);
        adam_step(actor_, actor_grads, cfg_.rl.actor_lr, actor_adam_);

        auto lo_v = steps.begin() + b * static_cast<long>(steps.size()) / nb;
        auto hi_v = steps.begin() + (b + 1) * static_cast<long>(steps.size()) / nb;
        std::vector<int> vb(lo_v, hi_v);
        double vloss = 0.0;
        if (!vb.empty()) {
          critic_grads.zero();
          vloss = accumulate_value_grads(critic_, buf, vb, cfg_.rl.huber_delta,
                                         critic_grads);
          clip_grad_norm(critic_grads, cfg_.rl.grad_clip);
          adam_step(critic_, critic_grads, cfg_.rl.critic_lr, critic_adam_);
        }
        obj_acc += pg.objective;
        ent_acc += pg.entropy;
        vloss_acc += vloss;
        ++chunks;
      }
    }
    st.policy_objective = obj_acc / chunks;
    st.entropy = ent_acc / chunks;
    st.value_loss = vloss_acc / chunks;
    return st;
  }

  std::uint64_t env_timesteps() const { return env_timesteps_; }

 private:
  void reset_episode() {
    std::uniform_real_distribution<double> u(0.0, 24.0);
    env_.reset(next_episode_index_++, u(phase_rng_));
    env_.randomize_control(phase_rng_);
    episode_steps_ = 0;
  }

  ScenarioConfig cfg_;
  Environment env_;
  Mlp actor_;
  Mlp critic_;
  AdamState actor_adam_;
  AdamState critic_adam_;
  Rng policy_rng_;
  Rng update_rng_;
  Rng phase_rng_;
  int episodes_done_ = 0;
  int episode_steps_ = 0;
  std::uint64_t next_episode_index_ = 0;
  std::uint64_t env_timesteps_ = 0;
  double rollout_reward_mean_ = 0.0;
  double rollout_pnet_mean_ = 0.0;
  double rollout_drop_ = 0.0;
};

// --- evaluation ------------------------------------------------------------------

struct EvalSummary {
  std::string policy;
  int episodes = 0;
  double mean_pnet = 0.0;       // W, time average over all decision steps
  double mean_ap_power = 0.0;   // W
  double mean_cloud_power = 0.0;
  double mean_drop = 0.0;       // mean over episodes of the final ledger mean
  std::array<double, 4> mode_fraction{0.0, 0.0, 0.0, 0.0};
  double mean_active_antennas = 0.0;
  double mean_reward = 0.0;  // per decision step
};

// Streamed per-decision-step trace rows, subsampled by stride.
using TraceSink = std::function<void(int episode, const StepInfo&)>;

// Paired-seed evaluation: episode e draws traffic from (cfg.rng_seed, e)
// regardless of the policy, so comparisons share identical arrivals.
inline EvalSummary evaluate_policy(Policy& pol, const ScenarioConfig& cfg,
                                   int episodes,
                                   const TraceSink& sink = nullptr,
                                   int trace_stride = 1) {
  Environment env(cfg);
  EvalSummary sum;
  sum.policy = pol.name();
  sum.episodes = episodes;
  std::uint64_t steps_total = 0;
  for (int e = 0; e < episodes; ++e) {
    env.reset(static_cast<std::uint64_t>(e));
    Rng policy_rng = make_rng(cfg.rng_seed, "eval-policy", static_cast<std::uint64_t>(e));
    std::vector<std::vector<double>> obs = env.observe_all();
    int step_idx = 0;
    while (!env.done()) {
      JointAction a = pol.act(env, obs, policy_rng);
      StepResult res = env.step(a);
      obs = std::move(res.observations);
      sum.mean_pnet += res.info.pnet_mean;
      sum.mean_ap_power += res.info.ap_power_mean;
      sum.mean_cloud_power += res.info.cloud_power_mean;
      sum.mean_active_antennas += res.info.mean_active_antennas;
      sum.mean_reward += res.reward;
      for (int m = 0; m < 4; ++m)
        sum.mode_fraction[static_cast<std::size_t>(m)] +=
            res.info.mode_counts[static_cast<std::size_t>(m)];
      if (sink && step_idx % trace_stride == 0) sink(e, res.info);
      ++step_idx;
      ++steps_total;
    }
    sum.mean_drop += env.ledger().mean_drop();
  }
  double n = static_cast<double>(steps_total);
  sum.mean_pnet /= n;
  sum.mean_ap_power /= n;
  sum.mean_cloud_power /= n;
  sum.mean_active_antennas /= n;
  sum.mean_reward /= n;
  for (double& f : sum.mode_fraction) f /= n * cfg.num_aps;
  sum.mean_drop /= episodes;
  return sum;
}

}  // namespace cfes
