#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cfes {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Point2 {
  double x = 0.0;  // km
  double y = 0.0;  // km
};

// Per-AP and cloud power model parameters. Numeric defaults are artifact
// choices (the source model defers them to hardware datasheets); all
// configurable.
struct PowerParams {
  double ap_static = 0.2;         // W per active antenna
  double tx_slope = 4.0;          // load-dependent transmit slope
  double ap_proc_idle = 1.0;      // W, idle processing per AP
  double ap_proc_slope = 10.0;    // W at full AP processing load
  double ap_gops_max = 200.0;     // GOPS
  double cloud_fixed = 20.0;      // W
  double cooling_eff = 0.9;
  double cloud_proc_idle = 20.0;  // W
  double cloud_proc_slope = 100.0;
  double cloud_gops_max = 2000.0;  // GOPS
  double cloud_gops_per_ue = 2.0;  // GOPS per active UE (modulation/coding)
  std::array<double, 4> sleep_discount{1.0, 0.675, 0.55, 0.23};
  std::array<double, 4> wake_latency{0.0, 37e-6, 500e-6, 5000e-6};  // s

  // AP GOPS model C = c0 + c1*m + c2*m*n, calibrated so that full load
  // (m = gops_ref_antennas, n = gops_ref_ues) hits ap_gops_max.
  int gops_ref_antennas = 8;
  int gops_ref_ues = 10;
  double gops_c0() const { return 0.05 * ap_gops_max; }
  double gops_c1() const { return 0.40 * ap_gops_max / gops_ref_antennas; }
  double gops_c2() const {
    return (ap_gops_max - gops_c0() - gops_c1() * gops_ref_antennas) /
           (static_cast<double>(gops_ref_antennas) * gops_ref_ues);
  }
};

// Synthetic diurnal profile parameters (substitute for operator DPI data).
struct TrafficConfig {
  std::string source = "synthetic";  // "synthetic" or path to a CSV file
  double peak_density = 400.0;       // Mbit/s/km^2, total over categories
  double trough_density = 50.0;      // peak/trough defaults to 8
  double peak_hour = 14.0;
  double trough_hour = 4.0;
  std::array<double, 3> category_mix{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::array<double, 3> delay_budget{0.050, 0.100, 0.150};  // s
  double profile_speedup = 12.0;  // 24 h of profile mapped onto 2 h of sim
};

struct RlParams {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double entropy_coef = 0.01;
  double actor_lr = 5e-4;
  double critic_lr = 5e-4;
  int ppo_epochs = 10;
  int minibatches = 32;
  double huber_delta = 10.0;
  double reward_w_rs = 60.0;
  double reward_w_pc = 0.4;
  double reward_phi = 5e-3;
  int episodes = 200;
  int rollout_length = 512;  // decision steps per iteration
  // Artifact knobs (architecture unspecified upstream).
  std::vector<int> actor_hidden{128, 128};
  std::vector<int> critic_hidden{256, 256};
  bool share_actor = true;
  double grad_clip = 0.5;
  int train_episode_steps = 512;  // decision steps per training episode
};

struct ScenarioConfig {
  double area_side = 1.0;  // km
  int num_aps = 25;
  int grid_rows = 5;
  int grid_cols = 5;
  int max_antennas = 8;
  double per_antenna_tx_power = 0.25;  // W
  double bandwidth = 20e6;             // Hz
  double carrier_freq = 5e9;           // Hz
  int coherence_block = 200;           // symbols
  int pilot_length = 7;                // symbols
  double noise_variance = 0.0;         // W; 0 = derive from thermal noise
  double pilot_power = 0.1;            // W per UE
  double cluster_energy_fraction = 0.9;
  double strong_ratio_threshold = 0.5;  // chi/beta cut for the PPZF split
  double drop_threshold = 1e-3;
  double timestep = 1e-3;       // s
  int decision_period = 20;     // timesteps between actions
  double demand_size = 1.5;     // Mbit per UE
  double ap_height = 10.0;      // m
  double ue_height = 1.5;       // m
  double shadow_sigma_db = 7.82;
  double episode_length = 7200.0;  // s of simulated time per episode
  int neighbor_count = 4;          // G nearest APs in the observation
  double pc_reward_scale = 1e-3;   // P_net multiplied by this in the reward
  std::uint64_t rng_seed = 1;

  PowerParams power;
  TrafficConfig traffic;
  RlParams rl;

  double noise_w() const {
    if (noise_variance > 0.0) return noise_variance;
    double dbm = -174.0 + 10.0 * std::log10(bandwidth) + 7.0;
    return std::pow(10.0, (dbm - 30.0) / 10.0);
  }
  double area_km2() const { return area_side * area_side; }
  double prelog() const {
    return static_cast<double>(coherence_block - pilot_length) /
           coherence_block;
  }
  int decision_steps_per_episode() const {
    return static_cast<int>(episode_length / (timestep * decision_period));
  }
};

inline void validate(const ScenarioConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (c.pilot_length < 1) fail("invariant violated: tau_p >= 1 (pilot_length)");
  if (c.pilot_length >= c.coherence_block)
    fail("invariant violated: tau_p < tau_c (pilot_length/coherence_block)");
  if (c.grid_rows * c.grid_cols != c.num_aps)
    fail("invariant violated: grid_rows * grid_cols = L (num_aps)");
  if (!(c.cluster_energy_fraction > 0.0 && c.cluster_energy_fraction <= 1.0))
    fail("invariant violated: cluster_energy_fraction in (0,1]");
  if (c.timestep <= 0.0) fail("invariant violated: dt > 0 (timestep)");
  if (c.decision_period < 1)
    fail("invariant violated: decision_period >= 1");
  if (c.area_side <= 0.0) fail("invariant violated: area_side > 0");
  if (c.num_aps < 1) fail("invariant violated: num_aps >= 1");
  if (c.max_antennas < 1) fail("invariant violated: max_antennas >= 1");
  if (c.per_antenna_tx_power <= 0.0)
    fail("invariant violated: per_antenna_tx_power > 0");
  if (c.pilot_power <= 0.0) fail("invariant violated: pilot_power > 0");
  if (c.demand_size <= 0.0) fail("invariant violated: demand_size > 0");
  if (c.episode_length <= 0.0) fail("invariant violated: episode_length > 0");
  if (!(c.rl.gamma > 0.0 && c.rl.gamma <= 1.0))
    fail("invariant violated: gamma in (0,1]");
  if (!(c.rl.gae_lambda >= 0.0 && c.rl.gae_lambda <= 1.0))
    fail("invariant violated: gae_lambda in [0,1]");
  if (c.rl.clip_eps <= 0.0) fail("invariant violated: clip_eps > 0");
  for (double f : c.traffic.category_mix)
    if (f < 0.0) fail("invariant violated: category_mix >= 0");
  for (double d : c.traffic.delay_budget)
    if (d <= 0.0) fail("invariant violated: delay_budget > 0");
  for (double p :
       {c.power.ap_static, c.power.ap_proc_idle, c.power.cloud_fixed,
        c.power.cloud_proc_idle})
    if (p < 0.0) fail("invariant violated: power params >= 0");
  if (c.power.cooling_eff <= 0.0)
    fail("invariant violated: cooling_eff > 0");
}

namespace detail {

template <typename T>
void get_to_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace detail

inline json to_json(const ScenarioConfig& c) {
  json geom{{"area_side", c.area_side},
            {"num_aps", c.num_aps},
            {"grid_rows", c.grid_rows},
            {"grid_cols", c.grid_cols},
            {"ap_height", c.ap_height},
            {"ue_height", c.ue_height}};
  json radio{{"max_antennas", c.max_antennas},
             {"per_antenna_tx_power", c.per_antenna_tx_power},
             {"bandwidth", c.bandwidth},
             {"carrier_freq", c.carrier_freq},
             {"coherence_block", c.coherence_block},
             {"pilot_length", c.pilot_length},
             {"noise_variance", c.noise_variance},
             {"pilot_power", c.pilot_power},
             {"cluster_energy_fraction", c.cluster_energy_fraction},
             {"strong_ratio_threshold", c.strong_ratio_threshold},
             {"shadow_sigma_db", c.shadow_sigma_db}};
  json power{{"ap_static", c.power.ap_static},
             {"tx_slope", c.power.tx_slope},
             {"ap_proc_idle", c.power.ap_proc_idle},
             {"ap_proc_slope", c.power.ap_proc_slope},
             {"ap_gops_max", c.power.ap_gops_max},
             {"cloud_fixed", c.power.cloud_fixed},
             {"cooling_eff", c.power.cooling_eff},
             {"cloud_proc_idle", c.power.cloud_proc_idle},
             {"cloud_proc_slope", c.power.cloud_proc_slope},
             {"cloud_gops_max", c.power.cloud_gops_max},
             {"cloud_gops_per_ue", c.power.cloud_gops_per_ue},
             {"sleep_discount", c.power.sleep_discount},
             {"wake_latency", c.power.wake_latency}};
  json traffic{{"source", c.traffic.source},
               {"peak_density", c.traffic.peak_density},
               {"trough_density", c.traffic.trough_density},
               {"peak_hour", c.traffic.peak_hour},
               {"trough_hour", c.traffic.trough_hour},
               {"category_mix", c.traffic.category_mix},
               {"delay_budget", c.traffic.delay_budget},
               {"profile_speedup", c.traffic.profile_speedup}};
  json rl{{"gamma", c.rl.gamma},
          {"gae_lambda", c.rl.gae_lambda},
          {"clip_eps", c.rl.clip_eps},
          {"entropy_coef", c.rl.entropy_coef},
          {"actor_lr", c.rl.actor_lr},
          {"critic_lr", c.rl.critic_lr},
          {"ppo_epochs", c.rl.ppo_epochs},
          {"minibatches", c.rl.minibatches},
          {"huber_delta", c.rl.huber_delta},
          {"reward_w_rs", c.rl.reward_w_rs},
          {"reward_w_pc", c.rl.reward_w_pc},
          {"reward_phi", c.rl.reward_phi},
          {"episodes", c.rl.episodes},
          {"rollout_length", c.rl.rollout_length},
          {"actor_hidden", c.rl.actor_hidden},
          {"critic_hidden", c.rl.critic_hidden},
          {"share_actor", c.rl.share_actor},
          {"grad_clip", c.rl.grad_clip},
          {"train_episode_steps", c.rl.train_episode_steps}};
  return json{{"geometry", geom},
              {"radio", radio},
              {"power", power},
              {"traffic", traffic},
              {"rl", rl},
              {"simulation",
               {{"drop_threshold", c.drop_threshold},
                {"timestep", c.timestep},
                {"decision_period", c.decision_period},
                {"demand_size", c.demand_size},
                {"episode_length", c.episode_length},
                {"neighbor_count", c.neighbor_count},
                {"pc_reward_scale", c.pc_reward_scale}}},
              {"rng_seed", c.rng_seed}};
}

// Missing fields keep their defaults; present fields override them.
inline ScenarioConfig from_json(const json& j) {
  using detail::get_to_if;
  ScenarioConfig c;
  if (j.contains("geometry")) {
    const json& g = j.at("geometry");
    get_to_if(g, "area_side", c.area_side);
    get_to_if(g, "num_aps", c.num_aps);
    get_to_if(g, "grid_rows", c.grid_rows);
    get_to_if(g, "grid_cols", c.grid_cols);
    get_to_if(g, "ap_height", c.ap_height);
    get_to_if(g, "ue_height", c.ue_height);
  }
  if (j.contains("radio")) {
    const json& r = j.at("radio");
    get_to_if(r, "max_antennas", c.max_antennas);
    get_to_if(r, "per_antenna_tx_power", c.per_antenna_tx_power);
    get_to_if(r, "bandwidth", c.bandwidth);
    get_to_if(r, "carrier_freq", c.carrier_freq);
    get_to_if(r, "coherence_block", c.coherence_block);
    get_to_if(r, "pilot_length", c.pilot_length);
    get_to_if(r, "noise_variance", c.noise_variance);
    get_to_if(r, "pilot_power", c.pilot_power);
    get_to_if(r, "cluster_energy_fraction", c.cluster_energy_fraction);
    get_to_if(r, "strong_ratio_threshold", c.strong_ratio_threshold);
    get_to_if(r, "shadow_sigma_db", c.shadow_sigma_db);
  }
  if (j.contains("power")) {
    const json& p = j.at("power");
    get_to_if(p, "ap_static", c.power.ap_static);
    get_to_if(p, "tx_slope", c.power.tx_slope);
    get_to_if(p, "ap_proc_idle", c.power.ap_proc_idle);
    get_to_if(p, "ap_proc_slope", c.power.ap_proc_slope);
    get_to_if(p, "ap_gops_max", c.power.ap_gops_max);
    get_to_if(p, "cloud_fixed", c.power.cloud_fixed);
    get_to_if(p, "cooling_eff", c.power.cooling_eff);
    get_to_if(p, "cloud_proc_idle", c.power.cloud_proc_idle);
    get_to_if(p, "cloud_proc_slope", c.power.cloud_proc_slope);
    get_to_if(p, "cloud_gops_max", c.power.cloud_gops_max);
    get_to_if(p, "cloud_gops_per_ue", c.power.cloud_gops_per_ue);
    get_to_if(p, "sleep_discount", c.power.sleep_discount);
    get_to_if(p, "wake_latency", c.power.wake_latency);
  }
  if (j.contains("traffic")) {
    const json& t = j.at("traffic");
    get_to_if(t, "source", c.traffic.source);
    get_to_if(t, "peak_density", c.traffic.peak_density);
    get_to_if(t, "trough_density", c.traffic.trough_density);
    get_to_if(t, "peak_hour", c.traffic.peak_hour);
    get_to_if(t, "trough_hour", c.traffic.trough_hour);
    get_to_if(t, "category_mix", c.traffic.category_mix);
    get_to_if(t, "delay_budget", c.traffic.delay_budget);
    get_to_if(t, "profile_speedup", c.traffic.profile_speedup);
  }
  if (j.contains("rl")) {
    const json& r = j.at("rl");
    get_to_if(r, "gamma", c.rl.gamma);
    get_to_if(r, "gae_lambda", c.rl.gae_lambda);
    get_to_if(r, "clip_eps", c.rl.clip_eps);
    get_to_if(r, "entropy_coef", c.rl.entropy_coef);
    get_to_if(r, "actor_lr", c.rl.actor_lr);
    get_to_if(r, "critic_lr", c.rl.critic_lr);
    get_to_if(r, "ppo_epochs", c.rl.ppo_epochs);
    get_to_if(r, "minibatches", c.rl.minibatches);
    get_to_if(r, "huber_delta", c.rl.huber_delta);
    get_to_if(r, "reward_w_rs", c.rl.reward_w_rs);
    get_to_if(r, "reward_w_pc", c.rl.reward_w_pc);
    get_to_if(r, "reward_phi", c.rl.reward_phi);
    get_to_if(r, "episodes", c.rl.episodes);
    get_to_if(r, "rollout_length", c.rl.rollout_length);
    get_to_if(r, "actor_hidden", c.rl.actor_hidden);
    get_to_if(r, "critic_hidden", c.rl.critic_hidden);
    get_to_if(r, "share_actor", c.rl.share_actor);
    get_to_if(r, "grad_clip", c.rl.grad_clip);
    get_to_if(r, "train_episode_steps", c.rl.train_episode_steps);
  }
  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    get_to_if(s, "drop_threshold", c.drop_threshold);
    get_to_if(s, "timestep", c.timestep);
    get_to_if(s, "decision_period", c.decision_period);
    get_to_if(s, "demand_size", c.demand_size);
    get_to_if(s, "episode_length", c.episode_length);
    get_to_if(s, "neighbor_count", c.neighbor_count);
    get_to_if(s, "pc_reward_scale", c.pc_reward_scale);
  }
  get_to_if(j, "rng_seed", c.rng_seed);
  return c;
}

// CFES_SEED in the environment overrides the config seed.
inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("parse error in " + path + ": " + e.what());
  }
  ScenarioConfig c;
  try {
    c = from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
  if (const char* env_seed = std::getenv("CFES_SEED")) {
    c.rng_seed = std::strtoull(env_seed, nullptr, 10);
  }
  validate(c);
  return c;
}

inline std::vector<Point2> ap_positions(const ScenarioConfig& c) {
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(c.num_aps));
  for (int i = 0; i < c.grid_cols; ++i) {
    for (int j = 0; j < c.grid_rows; ++j) {
      pts.push_back({(i + 0.5) * c.area_side / c.grid_cols,
                     (j + 0.5) * c.area_side / c.grid_rows});
    }
  }
  return pts;
}

}  // namespace cfes
