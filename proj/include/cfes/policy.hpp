#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cfes/env.hpp"
#include "cfes/nn.hpp"
#include "cfes/rng.hpp"

namespace cfes {

// Common surface for learned and scripted controllers. Policies see the
// per-AP observations plus public environment accessors; no privileged state.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual JointAction act(const Environment& env,
                          const std::vector<std::vector<double>>& obs,
                          Rng& rng) = 0;
  virtual std::string name() const = 0;
};

inline int antenna_delta_from_index(int idx) { return idx - 1; }

// Shared-parameter actor head driving every AP. Greedy (argmax) selection
// for evaluation, sampling for rollout collection.
class ActorPolicy : public Policy {
 public:
  ActorPolicy(Mlp actor, bool greedy) : actor_(std::move(actor)), greedy_(greedy) {}

  JointAction act(const Environment& env,
                  const std::vector<std::vector<double>>& obs, Rng& rng) override {
    JointAction a(static_cast<std::size_t>(env.num_aps()));
    for (int l = 0; l < env.num_aps(); ++l) {
      std::vector<double> logits = forward(actor_, obs[static_cast<std::size_t>(l)]);
      if (greedy_) {
        a[static_cast<std::size_t>(l)].antenna_delta =
            antenna_delta_from_index(argmax(logits.data(), kAntennaChoices));
        a[static_cast<std::size_t>(l)].sleep_choice =
            argmax(logits.data() + kAntennaChoices, kSleepChoices);
      } else {
        PolicySample s = sample_policy(logits, rng);
        a[static_cast<std::size_t>(l)].antenna_delta =
            antenna_delta_from_index(s.antenna_idx);
        a[static_cast<std::size_t>(l)].sleep_choice = s.sleep_idx;
      }
    }
    return a;
  }

  std::string name() const override { return "mappo"; }

  const Mlp& net() const { return actor_; }

 private:
  Mlp actor_;
  bool greedy_;
};

}  // namespace cfes
