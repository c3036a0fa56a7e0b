#pragma once

#include <numeric>
#include <stdexcept>
#include <vector>

#include "cfes/config.hpp"

namespace cfes {

struct PowerBreakdown {
  std::vector<double> per_ap;  // W
  double cloud = 0.0;          // W
  double total = 0.0;          // W
  bool cloud_overload = false;

  double ap_side() const {
    return std::accumulate(per_ap.begin(), per_ap.end(), 0.0);
  }
};

// AP processing load, GOPS. m = 0 sits at the idle floor c0.
inline double ap_gops(int m, int num_served, double bandwidth_frac,
                      const PowerParams& pp) {
  return pp.gops_c0() +
         (pp.gops_c1() * m + pp.gops_c2() * m * num_served) * bandwidth_frac;
}

// Per-AP power. Active (sleep_mode 0): static + transmit + processing.
// Sleeping: transmit is zero, processing at the idle floor, everything
// scaled by the mode's discount factor.
inline double ap_power(int m, double tx_power_sum, double gops, int sleep_mode,
                       const PowerParams& pp) {
  if (m < 0 || tx_power_sum < 0.0 || gops < 0.0)
    throw std::invalid_argument("ap_power: negative input");
  if (sleep_mode < 0 || sleep_mode > 3)
    throw std::invalid_argument("ap_power: sleep_mode out of range");
  if (sleep_mode == 0) {
    return m * pp.ap_static + pp.tx_slope * tx_power_sum +
           (pp.ap_proc_idle + pp.ap_proc_slope * gops / pp.ap_gops_max);
  }
  double idle_gops = pp.gops_c0();
  double base = m * pp.ap_static +
                (pp.ap_proc_idle + pp.ap_proc_slope * idle_gops / pp.ap_gops_max);
  return pp.sleep_discount[static_cast<std::size_t>(sleep_mode)] * base;
}

// Cloud-side power; load above capacity is billed at the capped ratio and
// flagged by the caller via the overload return.
inline double cloud_power(double total_gops, const PowerParams& pp,
                          bool* overload = nullptr) {
  if (total_gops < 0.0)
    throw std::invalid_argument("cloud_power: negative load");
  double ratio = total_gops / pp.cloud_gops_max;
  if (overload) *overload = ratio > 1.0;
  if (ratio > 1.0) ratio = 1.0;
  return pp.cloud_fixed +
         (pp.cloud_proc_idle + pp.cloud_proc_slope * ratio) / pp.cooling_eff;
}

inline double cloud_gops(int num_active_ues, double bandwidth_frac,
                         const PowerParams& pp) {
  return pp.cloud_gops_per_ue * num_active_ues * bandwidth_frac;
}

struct ApPowerInput {
  int antennas = 0;
  double tx_power_sum = 0.0;  // sum_k p_{l,k}, W
  int num_served = 0;
  int sleep_mode = 0;  // billed mode; waking APs are billed at 0
};

inline PowerBreakdown network_power(const std::vector<ApPowerInput>& aps,
                                    int num_active_ues,
                                    const PowerParams& pp,
                                    double bandwidth_frac = 1.0) {
  PowerBreakdown out;
  out.per_ap.reserve(aps.size());
  double total = 0.0;
  for (const ApPowerInput& a : aps) {
    double gops = a.sleep_mode == 0
                      ? ap_gops(a.antennas, a.num_served, bandwidth_frac, pp)
                      : pp.gops_c0();
    double w = ap_power(a.antennas, a.tx_power_sum, gops, a.sleep_mode, pp);
    out.per_ap.push_back(w);
    total += w;
  }
  out.cloud = cloud_power(cloud_gops(num_active_ues, bandwidth_frac, pp), pp,
                          &out.cloud_overload);
  out.total = total + out.cloud;
  return out;
}

}  // namespace cfes
