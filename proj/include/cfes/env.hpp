#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cfes/channel.hpp"
#include "cfes/config.hpp"
#include "cfes/phy.hpp"
#include "cfes/power.hpp"
#include "cfes/rng.hpp"
#include "cfes/traffic.hpp"

namespace cfes {

// Rate-satisfaction score: linear penalty below satisfaction, attenuated
// bonus above it. Continuous at rho = 1.
inline double rs_score(double rho, double phi) {
  if (rho < 1.0) return rho - 1.0;
  return phi * (1.0 - 1.0 / rho);
}

struct APControlState {
  int antennas = 0;
  int sleep_mode = 0;      // 0 = active, 1..3 = sleep depth
  double wake_timer = 0.0;  // s until operational after leaving a sleep mode

  bool operational() const {
    return sleep_mode == 0 && wake_timer <= 0.0 && antennas >= 1;
  }
};

struct ApAction {
  int antenna_delta = 0;  // in {-1, 0, +1}
  int sleep_choice = 0;   // in {0, 1, 2, 3}
};

using JointAction = std::vector<ApAction>;

struct StepInfo {
  double time_s = 0.0;
  double pnet_mean = 0.0;       // W, averaged over the decision period
  double ap_power_mean = 0.0;   // W
  double cloud_power_mean = 0.0;
  int num_ues = 0;
  double drop_running_mean = 0.0;
  std::array<int, 4> mode_counts{0, 0, 0, 0};  // waking APs in target mode
  double mean_active_antennas = 0.0;  // m_l over operational APs, 0 otherwise
  int clamped_deltas = 0;
  double rs_term_sum = 0.0;  // w_rs * mean(xi), summed over the period
  double pc_term_sum = 0.0;  // w_pc * P_net * scale, summed over the period
  double demand_rate_total = 0.0;  // Mbit/s over current UEs
  int departures = 0;
  int arrivals = 0;
};

struct StepResult {
  std::vector<std::vector<double>> observations;  // per AP
  std::vector<double> global_state;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// Observation normalization scales. All features are clipped to [-1, 1].
namespace obs_scale {
inline constexpr double kApPower = 20.0;       // W
inline constexpr double kAssocUes = 10.0;      // UEs
inline constexpr double kDemandRate = 100.0;   // Mbit/s
inline constexpr double kAchievedRate = 2000.0;  // Mbit/s
inline constexpr double kChiLogFloor = -14.0;  // log10 of linear gain
}  // namespace obs_scale

// Discrete-time downlink simulation of the network plus the MDP surface.
// One instance is strictly sequential; run several with independent seeds
// for parallel rollouts.
class Environment {
 public:
  explicit Environment(const ScenarioConfig& cfg)
      : cfg_(cfg), profile_(make_profile(cfg)), ap_pos_(ap_positions(cfg)) {
    build_neighbors();
    reset(0);
  }

  Environment(const ScenarioConfig& cfg, const TrafficProfile& profile)
      : cfg_(cfg), profile_(profile), ap_pos_(ap_positions(cfg)) {
    build_neighbors();
    reset(0);
  }

  // Traffic and shadowing substreams depend only on (seed, episode), so
  // traffic traces pair up across policies.
  void reset(std::uint64_t episode_index, double profile_offset_hours = 0.0) {
    traffic_rng_ = make_rng(cfg_.rng_seed, "traffic", episode_index);
    shadow_rng_ = make_rng(cfg_.rng_seed, "shadow", episode_index);
    control_.assign(static_cast<std::size_t>(cfg_.num_aps), APControlState{});
    for (auto& c : control_) {
      c.antennas = cfg_.max_antennas;
      c.sleep_mode = 0;
      c.wake_timer = 0.0;
    }
    sessions_.clear();
    ledger_ = DropLedger{};
    step_count_ = 0;
    next_ue_id_ = 0;
    profile_offset_hours_ = profile_offset_hours;
    delay_ratio_mean_ = 0.0;
    last_pnet_ = 0.0;
    last_lambda_ = 0.0;
    rebuild();
  }

  // Exploring start for training: scramble per-AP antennas and sleep modes
  // so boundary states (notably the full-power reset state) are visited
  // under every policy. Evaluation always starts from the plain reset.
  void randomize_control(Rng& rng) {
    std::uniform_int_distribution<int> m(0, cfg_.max_antennas);
    std::uniform_int_distribution<int> s(0, 3);
    for (auto& c : control_) {
      c.antennas = m(rng);
      c.sleep_mode = s(rng);
      c.wake_timer = 0.0;
    }
    rebuild();
  }

  int num_aps() const { return cfg_.num_aps; }
  const ScenarioConfig& config() const { return cfg_; }
  const std::vector<UESession>& sessions() const { return sessions_; }
  const DropLedger& ledger() const { return ledger_; }
  const std::vector<APControlState>& control() const { return control_; }
  const TrafficProfile& profile() const { return profile_; }
  double profile_hour() const {
    return profile_offset_hours_ +
           step_count_ * cfg_.timestep * cfg_.traffic.profile_speedup / 3600.0;
  }
  bool done() const {
    return step_count_ >=
           static_cast<std::uint64_t>(cfg_.episode_length / cfg_.timestep);
  }

  // Per-AP aggregates over the *nominal* association (strongest-gain APs
  // irrespective of sleep state): sleeping APs keep seeing the service
  // requests that would wake them.
  int ap_assoc_count(int l) const { return ap_assoc_count_[l]; }
  double ap_demand_rate(int l) const { return ap_demand_rate_[l]; }    // Mbit/s
  double ap_achieved_rate(int l) const { return ap_achieved_rate_[l]; }  // Mbit/s

  int observation_width() const { return 8 + 2 * neighbor_count_; }
  int global_state_width() const { return 4 + 2 * cfg_.num_aps; }

  std::vector<double> observe(int ap) const {
    std::vector<double> o;
    o.reserve(static_cast<std::size_t>(observation_width()));
    const APControlState& c = control_[static_cast<std::size_t>(ap)];
    o.push_back(clip(ap_power_now_[static_cast<std::size_t>(ap)] /
                     obs_scale::kApPower));
    o.push_back(static_cast<double>(c.antennas) / cfg_.max_antennas);
    o.push_back(c.sleep_mode / 3.0);
    o.push_back(c.wake_timer > 0.0 ? 1.0 : 0.0);
    o.push_back(clip(ap_assoc_count_[ap] / obs_scale::kAssocUes));
    o.push_back(clip(ap_demand_rate_[ap] / obs_scale::kDemandRate));
    o.push_back(clip(ap_achieved_rate_[ap] / obs_scale::kAchievedRate));
    o.push_back(mean_chi_feature(ap));
    for (int g = 0; g < neighbor_count_; ++g) {
      int n = neighbors_[static_cast<std::size_t>(ap)][static_cast<std::size_t>(g)];
      const APControlState& nc = control_[static_cast<std::size_t>(n)];
      o.push_back(static_cast<double>(nc.antennas) / cfg_.max_antennas);
      o.push_back(nc.sleep_mode / 3.0);
    }
    return o;
  }

  std::vector<std::vector<double>> observe_all() const {
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(cfg_.num_aps));
    for (int l = 0; l < cfg_.num_aps; ++l) out.push_back(observe(l));
    return out;
  }

  std::vector<double> global_state() const {
    std::vector<double> s;
    s.reserve(static_cast<std::size_t>(global_state_width()));
    s.push_back(last_pnet_ * cfg_.pc_reward_scale);
    s.push_back(last_lambda_);
    s.push_back(ledger_.mean_drop());
    s.push_back(delay_ratio_mean_);
    for (const APControlState& c : control_) {
      s.push_back(static_cast<double>(c.antennas) / cfg_.max_antennas);
      s.push_back(c.sleep_mode / 3.0);
    }
    return s;
  }

  // Apply the joint action. Antenna deltas clamp at [0, M_max] (clamps are
  // counted, never faulted). Deepening sleep is immediate; any move toward a
  // shallower mode pays the exited mode's wake-up latency, during which the
  // AP neither transmits nor serves but is billed at active-mode power.
  int apply_actions(const JointAction& action) {
    int clamped = 0;
    for (int l = 0; l < cfg_.num_aps; ++l) {
      APControlState& c = control_[static_cast<std::size_t>(l)];
      const ApAction& a = action[static_cast<std::size_t>(l)];
      int m = c.antennas + a.antenna_delta;
      if (m < 0 || m > cfg_.max_antennas) {
        ++clamped;
        m = std::clamp(m, 0, cfg_.max_antennas);
      }
      c.antennas = m;
      int target = std::clamp(a.sleep_choice, 0, 3);
      if (target > c.sleep_mode) {
        c.sleep_mode = target;  // deepening is instantaneous
        c.wake_timer = 0.0;
      } else if (target < c.sleep_mode) {
        double latency =
            cfg_.power.wake_latency[static_cast<std::size_t>(c.sleep_mode)];
        c.sleep_mode = target;
        c.wake_timer = latency;
      }
    }
    return clamped;
  }

  // One decision step: apply the joint action, then advance decision_period
  // timesteps of arrivals, service, and departures. Reward is the sum of
  // per-timestep rewards over the period.
  StepResult step(const JointAction& action) {
    StepResult res;
    res.info.clamped_deltas = apply_actions(action);
    bool needs_rebuild = true;

    double reward = 0.0;
    double pnet_acc = 0.0, ap_acc = 0.0, cloud_acc = 0.0;
    for (int t = 0; t < cfg_.decision_period; ++t) {
      if (needs_rebuild) {
        rebuild();
        needs_rebuild = false;
      }
      // Arrivals enter at this boundary; they are served from the next
      // rebuild onward.
      int arrivals = spawn_arrivals();
      res.info.arrivals += arrivals;

      std::vector<Departure> departed =
          advance_sessions(sessions_, rate_mbps_, cfg_.timestep);
      for (const Departure& d : departed) ledger_.record(d);
      res.info.departures += static_cast<int>(departed.size());

      bool woke = tick_wake_timers();
      if (arrivals > 0 || !departed.empty() || woke) needs_rebuild = true;

      // Per-timestep reward on the post-advance state.
      PowerBreakdown pb = current_power();
      last_pnet_ = pb.total;
      double mean_xi = mean_rs_score();
      double rs_term = cfg_.rl.reward_w_rs * mean_xi;
      double pc_term =
          cfg_.rl.reward_w_pc * pb.total * cfg_.pc_reward_scale;
      reward += rs_term - pc_term;
      res.info.rs_term_sum += rs_term;
      res.info.pc_term_sum += pc_term;
      pnet_acc += pb.total;
      ap_acc += pb.ap_side();
      cloud_acc += pb.cloud;
      ++step_count_;
    }
    if (needs_rebuild) rebuild();
    update_delay_ratio();

    res.reward = reward;
    res.done = done();
    res.observations = observe_all();
    res.global_state = global_state();
    res.info.time_s = step_count_ * cfg_.timestep;
    res.info.pnet_mean = pnet_acc / cfg_.decision_period;
    res.info.ap_power_mean = ap_acc / cfg_.decision_period;
    res.info.cloud_power_mean = cloud_acc / cfg_.decision_period;
    res.info.num_ues = static_cast<int>(sessions_.size());
    res.info.drop_running_mean = ledger_.mean_drop();
    for (const APControlState& c : control_) {
      res.info.mode_counts[static_cast<std::size_t>(c.sleep_mode)]++;
      if (c.operational()) res.info.mean_active_antennas += c.antennas;
    }
    res.info.mean_active_antennas /= cfg_.num_aps;
    double total_req = 0.0;
    for (const UESession& s : sessions_)
      total_req += s.demand_size / s.delay_budget;
    res.info.demand_rate_total = total_req;
    double lam = 0.0;
    for (int z = 0; z < kNumCategories; ++z) {
      lam += arrival_rate(profile_, z, profile_hour(), cfg_.area_km2(),
                          cfg_.timestep, cfg_.demand_size);
    }
    last_lambda_ = lam;
    return res;
  }

  // Instantaneous network power under the current control and allocation.
  PowerBreakdown current_power() const {
    std::vector<ApPowerInput> inputs(static_cast<std::size_t>(cfg_.num_aps));
    for (int l = 0; l < cfg_.num_aps; ++l) {
      ApPowerInput& in = inputs[static_cast<std::size_t>(l)];
      const APControlState& c = control_[static_cast<std::size_t>(l)];
      in.antennas = c.antennas;
      // Waking hardware is billed at active power while unable to transmit.
      in.sleep_mode = c.wake_timer > 0.0 ? 0 : c.sleep_mode;
      in.tx_power_sum = ap_tx_sum_[static_cast<std::size_t>(l)];
      in.num_served = ap_served_count_[static_cast<std::size_t>(l)];
    }
    return network_power(inputs, static_cast<int>(sessions_.size()), cfg_.power);
  }

  // Mean RS score over current UEs; 0 when no UEs are present.
  double mean_rs_score() const {
    if (sessions_.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < sessions_.size(); ++i) {
      sum += rs_score(session_rho(sessions_[i]), cfg_.rl.reward_phi);
    }
    return sum / static_cast<double>(sessions_.size());
  }

  double session_rho(const UESession& s) const {
    double elapsed = std::max(s.delay_budget - s.delay_remaining, cfg_.timestep);
    double served = s.demand_size - s.demand_remaining;
    double r_ach = served / elapsed;
    double r_req = s.demand_size / s.delay_budget;
    return r_ach / r_req;
  }

  const ClusterMap& effective_clusters() const { return eff_clusters_; }
  const LargeScaleTable& beta_table() const { return beta_; }
  const EstimateTable& chi_table() const { return chi_; }
  const RateReport& rates() const { return rates_; }
  const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }

 private:
  static double clip(double v) { return std::clamp(v, -1.0, 1.0); }

  void build_neighbors() {
    neighbor_count_ = std::min(cfg_.neighbor_count, cfg_.num_aps - 1);
    neighbors_.assign(static_cast<std::size_t>(cfg_.num_aps), {});
    for (int l = 0; l < cfg_.num_aps; ++l) {
      std::vector<int> order;
      for (int j = 0; j < cfg_.num_aps; ++j)
        if (j != l) order.push_back(j);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        double da = dist2(ap_pos_[l], ap_pos_[a]);
        double db = dist2(ap_pos_[l], ap_pos_[b]);
        if (da != db) return da < db;
        return a < b;
      });
      order.resize(static_cast<std::size_t>(neighbor_count_));
      neighbors_[static_cast<std::size_t>(l)] = order;
    }
  }

  static double dist2(const Point2& a, const Point2& b) {
    double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy;
  }

  int spawn_arrivals() {
    int total = 0;
    double hour = profile_hour();
    for (int z = 0; z < kNumCategories; ++z) {
      double lam = arrival_rate(profile_, z, hour, cfg_.area_km2(),
                                cfg_.timestep, cfg_.demand_size);
      int n = sample_poisson(lam, traffic_rng_);
      for (int i = 0; i < n; ++i) {
        UESession s;
        s.id = next_ue_id_++;
        s.position = sample_position(cfg_.area_side, traffic_rng_);
        s.category = z;
        s.demand_size = cfg_.demand_size;
        s.demand_remaining = cfg_.demand_size;
        s.delay_budget = profile_.delay_budget[static_cast<std::size_t>(z)];
        s.delay_remaining = s.delay_budget;
        s.arrival_step = step_count_;
        s.beta.resize(static_cast<std::size_t>(cfg_.num_aps));
        std::normal_distribution<double> shadow(0.0, cfg_.shadow_sigma_db);
        for (int l = 0; l < cfg_.num_aps; ++l) {
          s.beta[static_cast<std::size_t>(l)] = large_scale_gain(
              ap_pos_[static_cast<std::size_t>(l)], s.position,
              shadow(shadow_rng_), cfg_);
        }
        sessions_.push_back(std::move(s));
        rate_mbps_.push_back(0.0);  // served from the next rebuild
        ++total;
      }
    }
    return total;
  }

  bool tick_wake_timers() {
    bool woke = false;
    for (APControlState& c : control_) {
      if (c.wake_timer > 0.0) {
        c.wake_timer -= cfg_.timestep;
        if (c.wake_timer <= 0.0) {
          c.wake_timer = 0.0;
          woke = true;
        }
      }
    }
    return woke;
  }

  void update_delay_ratio() {
    if (sessions_.empty()) {
      delay_ratio_mean_ = 0.0;
      return;
    }
    double acc = 0.0;
    for (const UESession& s : sessions_)
      acc += (s.delay_budget - s.delay_remaining) / s.delay_budget;
    delay_ratio_mean_ = acc / static_cast<double>(sessions_.size());
  }

  double mean_chi_feature(int ap) const {
    if (eff_clusters_.served_ues.empty()) return 0.0;
    const auto& served = eff_clusters_.served_ues[static_cast<std::size_t>(ap)];
    if (served.empty()) return 0.0;
    double acc = 0.0;
    for (int k : served) acc += chi_.at(ap, k);
    double mean = acc / static_cast<double>(served.size());
    // log10 gain mapped so that the floor scale lands at -1.
    return clip(-std::log10(std::max(mean, 1e-30)) / obs_scale::kChiLogFloor);
  }

  void rebuild() {
    const int L = cfg_.num_aps;
    const int K = static_cast<int>(sessions_.size());
    beta_.num_aps = L;
    beta_.num_ues = K;
    beta_.beta.assign(static_cast<std::size_t>(L) * K, 0.0);
    beta_.positions_ue.clear();
    for (int k = 0; k < K; ++k) {
      beta_.positions_ue.push_back(sessions_[static_cast<std::size_t>(k)].position);
      for (int l = 0; l < L; ++l) {
        beta_.at(l, k) =
            sessions_[static_cast<std::size_t>(k)].beta[static_cast<std::size_t>(l)];
      }
    }
    pilots_ = assign_pilots(beta_, cfg_.pilot_length);
    chi_ = estimate_gains(beta_, pilots_, cfg_.pilot_length, cfg_.pilot_power,
                          cfg_.noise_w());

    std::vector<int> antennas(static_cast<std::size_t>(L));
    std::vector<char> operational(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) {
      antennas[l] = control_[static_cast<std::size_t>(l)].antennas;
      operational[l] = control_[static_cast<std::size_t>(l)].operational() ? 1 : 0;
    }

    // Nominal association: strongest APs irrespective of sleep state.
    std::vector<char> all(static_cast<std::size_t>(L), 1);
    std::vector<int> full(static_cast<std::size_t>(L), cfg_.max_antennas);
    nominal_clusters_ =
        build_clusters(beta_, chi_, pilots_, cfg_.cluster_energy_fraction,
                       cfg_.pilot_length, full, all, cfg_.strong_ratio_threshold);
    // Effective service: operational APs only.
    eff_clusters_ =
        build_clusters(beta_, chi_, pilots_, cfg_.cluster_energy_fraction,
                       cfg_.pilot_length, antennas, operational,
                       cfg_.strong_ratio_threshold);
    alloc_ = allocate_power(eff_clusters_, chi_, antennas, operational,
                            cfg_.per_antenna_tx_power);
    rates_ = compute_sinr(eff_clusters_, chi_, beta_, alloc_, antennas, pilots_,
                          cfg_.noise_w(), cfg_.bandwidth, cfg_.prelog());

    rate_mbps_.assign(static_cast<std::size_t>(K), 0.0);
    for (int k = 0; k < K; ++k) rate_mbps_[k] = rates_.rate[k] / 1e6;

    ap_tx_sum_.assign(static_cast<std::size_t>(L), 0.0);
    ap_served_count_.assign(static_cast<std::size_t>(L), 0);
    ap_assoc_count_.assign(static_cast<std::size_t>(L), 0);
    ap_demand_rate_.assign(static_cast<std::size_t>(L), 0.0);
    ap_achieved_rate_.assign(static_cast<std::size_t>(L), 0.0);
    ap_power_now_.assign(static_cast<std::size_t>(L), 0.0);
    for (int l = 0; l < L; ++l) {
      ap_tx_sum_[l] = alloc_.row_sum(l);
      ap_served_count_[l] =
          static_cast<int>(eff_clusters_.served_ues[static_cast<std::size_t>(l)].size());
      const auto& assoc = nominal_clusters_.served_ues[static_cast<std::size_t>(l)];
      ap_assoc_count_[l] = static_cast<int>(assoc.size());
      for (int k : assoc) {
        const UESession& s = sessions_[static_cast<std::size_t>(k)];
        ap_demand_rate_[l] += s.demand_size / s.delay_budget;
        ap_achieved_rate_[l] += rate_mbps_[static_cast<std::size_t>(k)];
      }
    }
    PowerBreakdown pb = current_power();
    for (int l = 0; l < L; ++l) ap_power_now_[l] = pb.per_ap[static_cast<std::size_t>(l)];
    last_pnet_ = pb.total;
  }

  ScenarioConfig cfg_;
  TrafficProfile profile_;
  std::vector<Point2> ap_pos_;
  std::vector<std::vector<int>> neighbors_;
  int neighbor_count_ = 0;

  Rng traffic_rng_{0};
  Rng shadow_rng_{0};
  std::vector<APControlState> control_;
  std::vector<UESession> sessions_;
  std::vector<double> rate_mbps_;  // aligned with sessions_
  DropLedger ledger_;
  std::uint64_t step_count_ = 0;
  std::uint64_t next_ue_id_ = 0;
  double profile_offset_hours_ = 0.0;
  double delay_ratio_mean_ = 0.0;
  double last_pnet_ = 0.0;
  double last_lambda_ = 0.0;

  LargeScaleTable beta_;
  PilotAssignment pilots_;
  EstimateTable chi_;
  ClusterMap nominal_clusters_;
  ClusterMap eff_clusters_;
  PowerAllocation alloc_;
  RateReport rates_;
  std::vector<double> ap_tx_sum_;
  std::vector<int> ap_served_count_;
  std::vector<int> ap_assoc_count_;
  std::vector<double> ap_demand_rate_;
  std::vector<double> ap_achieved_rate_;
  std::vector<double> ap_power_now_;
};

}  // namespace cfes
