#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "cfes/env.hpp"
#include "cfes/mappo.hpp"
#include "cfes/nn.hpp"
#include "cfes/policy.hpp"

namespace cfes {

// Keeps every AP awake with all antennas on.
class AlwaysOnPolicy : public Policy {
 public:
  JointAction act(const Environment& env, const std::vector<std::vector<double>>&,
                  Rng&) override {
    JointAction a(static_cast<std::size_t>(env.num_aps()));
    for (int l = 0; l < env.num_aps(); ++l) {
      const APControlState& c = env.control()[static_cast<std::size_t>(l)];
      a[static_cast<std::size_t>(l)].antenna_delta =
          c.antennas < env.config().max_antennas ? 1 : 0;
      a[static_cast<std::size_t>(l)].sleep_choice = 0;
    }
    return a;
  }
  std::string name() const override { return "always-on"; }
};

// Dynamic antenna configuration with light sleep: idle APs drop to SM1,
// busy APs step antennas down/up on dual achieved-to-demand-rate thresholds.
class DacSm1Policy : public Policy {
 public:
  DacSm1Policy(double upper = 55.0, double lower = 45.0)
      : upper_(upper), lower_(lower) {}

  JointAction act(const Environment& env, const std::vector<std::vector<double>>&,
                  Rng&) override {
    JointAction a(static_cast<std::size_t>(env.num_aps()));
    for (int l = 0; l < env.num_aps(); ++l) {
      ApAction& act = a[static_cast<std::size_t>(l)];
      if (env.ap_assoc_count(l) == 0) {
        act.sleep_choice = 1;
        act.antenna_delta = 0;
        continue;
      }
      act.sleep_choice = 0;
      double demand = env.ap_demand_rate(l);
      double ratio = demand > 0.0 ? env.ap_achieved_rate(l) / demand
                                  : std::numeric_limits<double>::infinity();
      if (ratio > upper_) {
        act.antenna_delta = -1;
      } else if (ratio < lower_) {
        act.antenna_delta = 1;
      } else {
        act.antenna_delta = 0;
      }
    }
    return a;
  }
  std::string name() const override { return "dac-sm1"; }

 private:
  double upper_;
  double lower_;
};

// --- DQN ---------------------------------------------------------------------

struct DqnParams {
  int replay_capacity = 100000;
  int batch_size = 128;
  int target_sync = 1000;       // updates between target-network copies
  double eps_start = 1.0;
  double eps_end = 0.05;
  int eps_decay_steps = 50000;  // decision steps
  double lr = 5e-4;
  double gamma = 0.99;
  int update_every = 4;         // decision steps between gradient updates
  double huber_delta = 10.0;
  double grad_clip = 0.5;

  double epsilon(std::uint64_t step) const {
    if (step >= static_cast<std::uint64_t>(eps_decay_steps)) return eps_end;
    double f = static_cast<double>(step) / eps_decay_steps;
    return eps_start + f * (eps_end - eps_start);
  }
};

inline constexpr int kJointActions = kAntennaChoices * kSleepChoices;  // 12

inline ApAction joint_action_from_index(int idx) {
  ApAction a;
  a.antenna_delta = antenna_delta_from_index(idx / kSleepChoices);
  a.sleep_choice = idx % kSleepChoices;
  return a;
}

// Greedy policy over a trained Q-network (shared across APs).
class DqnPolicy : public Policy {
 public:
  explicit DqnPolicy(Mlp qnet) : qnet_(std::move(qnet)) {}

  JointAction act(const Environment& env,
                  const std::vector<std::vector<double>>& obs, Rng&) override {
    JointAction a(static_cast<std::size_t>(env.num_aps()));
    for (int l = 0; l < env.num_aps(); ++l) {
      std::vector<double> q = forward(qnet_, obs[static_cast<std::size_t>(l)]);
      a[static_cast<std::size_t>(l)] =
          joint_action_from_index(argmax(q.data(), kJointActions));
    }
    return a;
  }
  std::string name() const override { return "dqn"; }

  const Mlp& net() const { return qnet_; }

 private:
  Mlp qnet_;
};

struct Transition {
  std::vector<double> obs;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool done = false;
};

struct DqnIterationStats {
  int episode = 0;
  std::uint64_t env_timesteps = 0;
  double mean_reward = 0.0;
  double epsilon = 0.0;
  double td_loss = 0.0;
  double mean_pnet = 0.0;
  double drop_ratio = 0.0;
};

// Per-agent Q-learning over the 12-way joint action space, shared network,
// uniform replay, target network, Huber TD loss on the same global reward
// and observation template as MAPPO.
class DqnTrainer {
 public:
  DqnTrainer(const ScenarioConfig& cfg, const DqnParams& params,
             std::uint64_t training_seed)
      : cfg_(cfg),
        params_(params),
        env_(cfg),
        policy_rng_(make_rng(training_seed, "dqn-policy")),
        replay_rng_(make_rng(training_seed, "dqn-replay")),
        phase_rng_(make_rng(training_seed, "dqn-phase")) {
    Rng init_rng = make_rng(training_seed, "dqn-init");
    qnet_ = make_mlp(env_.observation_width(), cfg.rl.actor_hidden,
                     kJointActions, init_rng);
    target_ = qnet_;
    adam_ = make_adam(qnet_);
  }

  const Mlp& qnet() const { return qnet_; }
  const Mlp& target() const { return target_; }

  void sync_target() { target_ = qnet_; }

  using Callback = std::function<void(const DqnIterationStats&)>;

  void train(const Callback& on_episode) {
    for (int ep = 0; ep < cfg_.rl.episodes; ++ep) {
      std::uniform_real_distribution<double> u(0.0, 24.0);
      env_.reset(static_cast<std::uint64_t>(ep), u(phase_rng_));
      env_.randomize_control(phase_rng_);
      std::vector<std::vector<double>> obs = env_.observe_all();
      double reward_acc = 0.0, pnet_acc = 0.0, loss_acc = 0.0;
      int loss_n = 0;
      for (int t = 0; t < cfg_.rl.train_episode_steps && !env_.done(); ++t) {
        double eps = params_.epsilon(decision_steps_);
        std::vector<int> chosen(static_cast<std::size_t>(cfg_.num_aps));
        JointAction action(static_cast<std::size_t>(cfg_.num_aps));
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        std::uniform_int_distribution<int> rand_action(0, kJointActions - 1);
        for (int l = 0; l < cfg_.num_aps; ++l) {
          int idx;
          if (coin(policy_rng_) < eps) {
            idx = rand_action(policy_rng_);
          } else {
            std::vector<double> q =
                forward(qnet_, obs[static_cast<std::size_t>(l)]);
            idx = argmax(q.data(), kJointActions);
          }
          chosen[static_cast<std::size_t>(l)] = idx;
          action[static_cast<std::size_t>(l)] = joint_action_from_index(idx);
        }
        StepResult res = env_.step(action);
        for (int l = 0; l < cfg_.num_aps; ++l) {
          Transition tr;
          tr.obs = obs[static_cast<std::size_t>(l)];
          tr.action = chosen[static_cast<std::size_t>(l)];
          tr.reward = res.reward;
          tr.next_obs = res.observations[static_cast<std::size_t>(l)];
          tr.done = res.done;
          push_replay(std::move(tr));
        }
        obs = std::move(res.observations);
        reward_acc += res.reward;
        pnet_acc += res.info.pnet_mean;
        ++decision_steps_;
        env_timesteps_ += static_cast<std::uint64_t>(cfg_.decision_period);

        if (decision_steps_ % static_cast<std::uint64_t>(params_.update_every) ==
                0 &&
            static_cast<int>(replay_.size()) >= params_.batch_size) {
          double loss = update_batch();
          if (!std::isfinite(loss))
            throw TrainError("dqn diverged: non-finite TD loss");
          loss_acc += loss;
          ++loss_n;
        }
      }
      if (on_episode) {
        DqnIterationStats st;
        st.episode = ep + 1;
        st.env_timesteps = env_timesteps_;
        st.mean_reward = reward_acc / cfg_.rl.train_episode_steps;
        st.epsilon = params_.epsilon(decision_steps_);
        st.td_loss = loss_n > 0 ? loss_acc / loss_n : 0.0;
        st.mean_pnet = pnet_acc / cfg_.rl.train_episode_steps;
        st.drop_ratio = env_.ledger().mean_drop();
        on_episode(st);
      }
    }
  }

  // One gradient step on a uniform replay batch; returns the batch TD loss.
  double update_batch() {
    MlpGrads grads = make_grads(qnet_);
    ForwardCache cache;
    std::uniform_int_distribution<std::size_t> pick(0, replay_.size() - 1);
    double loss = 0.0;
    const double inv_n = 1.0 / params_.batch_size;
    for (int i = 0; i < params_.batch_size; ++i) {
      const Transition& tr = replay_[pick(replay_rng_)];
      double target_q = tr.reward;
      if (!tr.done) {
        std::vector<double> qn = forward(target_, tr.next_obs);
        target_q += params_.gamma * qn[static_cast<std::size_t>(
                                       argmax(qn.data(), kJointActions))];
      }
      std::vector<double> q = forward(qnet_, tr.obs, &cache);
      double e = q[static_cast<std::size_t>(tr.action)] - target_q;
      loss += huber(e, params_.huber_delta) * inv_n;
      std::vector<double> dq(static_cast<std::size_t>(kJointActions), 0.0);
      dq[static_cast<std::size_t>(tr.action)] =
          huber_grad(e, params_.huber_delta) * inv_n;
      backward(qnet_, cache, dq, grads);
    }
    clip_grad_norm(grads, params_.grad_clip);
    adam_step(qnet_, grads, params_.lr, adam_);
    ++updates_;
    if (updates_ % static_cast<std::uint64_t>(params_.target_sync) == 0)
      sync_target();
    return loss;
  }

  std::uint64_t env_timesteps() const { return env_timesteps_; }

 private:
  void push_replay(Transition&& tr) {
    if (static_cast<int>(replay_.size()) >= params_.replay_capacity)
      replay_.pop_front();
    replay_.push_back(std::move(tr));
  }

  ScenarioConfig cfg_;
  DqnParams params_;
  Environment env_;
  Mlp qnet_;
  Mlp target_;
  AdamState adam_;
  Rng policy_rng_;
  Rng replay_rng_;
  Rng phase_rng_;
  std::deque<Transition> replay_;
  std::uint64_t decision_steps_ = 0;
  std::uint64_t env_timesteps_ = 0;
  std::uint64_t updates_ = 0;
};

}  // namespace cfes
