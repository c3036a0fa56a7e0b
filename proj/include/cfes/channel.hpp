#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "cfes/config.hpp"

namespace cfes {

// Large-scale gains beta[l][k], linear. Row-major [L x K].
struct LargeScaleTable {
  int num_aps = 0;
  int num_ues = 0;
  std::vector<double> beta;  // L*K
  std::vector<Point2> positions_ue;

  double& at(int l, int k) { return beta[static_cast<std::size_t>(l) * num_ues + k]; }
  double at(int l, int k) const {
    return beta[static_cast<std::size_t>(l) * num_ues + k];
  }
};

struct PilotAssignment {
  std::vector<int> pilot_of;                  // per UE, in [0, tau_p)
  std::vector<std::vector<int>> cocontaminators;  // P_k, includes k itself
};

struct EstimateTable {
  int num_aps = 0;
  int num_ues = 0;
  std::vector<double> chi;  // L*K

  double& at(int l, int k) { return chi[static_cast<std::size_t>(l) * num_ues + k]; }
  double at(int l, int k) const {
    return chi[static_cast<std::size_t>(l) * num_ues + k];
  }
};

struct ClusterMap {
  std::vector<std::vector<int>> serving_aps;  // M_k, ordered by beta desc
  std::vector<std::vector<int>> served_ues;   // K_l
  std::vector<std::vector<int>> strong_set;   // per AP, subset of K_l
  std::vector<int> tau_str;                   // distinct pilots among strong UEs
  std::vector<std::vector<char>> strong_flag;  // delta_{l,k}, [L][K]

  bool is_strong(int l, int k) const { return strong_flag[l][k] != 0; }
};

// 3GPP UMi-NLOS path loss at carrier f_c, with log-normal shadowing supplied
// by the caller in dB. Distances in km, heights from the config.
inline double large_scale_gain(const Point2& ap, const Point2& ue,
                               double shadow_db, const ScenarioConfig& cfg) {
  double dx = (ap.x - ue.x) * 1000.0;
  double dy = (ap.y - ue.y) * 1000.0;
  double dz = cfg.ap_height - cfg.ue_height;
  double d3d = std::sqrt(dx * dx + dy * dy + dz * dz);
  d3d = std::max(d3d, 1.0);
  double fc_ghz = cfg.carrier_freq / 1e9;
  double pl_db = 35.3 * std::log10(d3d) + 22.4 + 21.3 * std::log10(fc_ghz);
  return std::pow(10.0, -(pl_db + shadow_db) / 10.0);
}

// Greedy least-contamination assignment: UEs in index order; when pilots run
// out, each UE takes the pilot whose current co-users have minimal summed
// gain toward the UE's strongest AP.
inline PilotAssignment assign_pilots(const LargeScaleTable& beta, int tau_p) {
  const int K = beta.num_ues;
  const int L = beta.num_aps;
  PilotAssignment pa;
  pa.pilot_of.assign(K, -1);
  std::vector<std::vector<int>> users_of(static_cast<std::size_t>(tau_p));
  for (int k = 0; k < K; ++k) {
    if (k < tau_p) {
      pa.pilot_of[k] = k;
      users_of[k].push_back(k);
      continue;
    }
    int best_ap = 0;
    double best_beta = -1.0;
    for (int l = 0; l < L; ++l) {
      if (beta.at(l, k) > best_beta) {
        best_beta = beta.at(l, k);
        best_ap = l;
      }
    }
    int best_pilot = 0;
    double best_cont = std::numeric_limits<double>::infinity();
    for (int p = 0; p < tau_p; ++p) {
      double cont = 0.0;
      for (int t : users_of[p]) cont += beta.at(best_ap, t);
      if (cont < best_cont) {
        best_cont = cont;
        best_pilot = p;
      }
    }
    pa.pilot_of[k] = best_pilot;
    users_of[best_pilot].push_back(k);
  }
  pa.cocontaminators.assign(K, {});
  for (int k = 0; k < K; ++k) {
    pa.cocontaminators[k] = users_of[pa.pilot_of[k]];
  }
  return pa;
}

// MMSE estimate gain under pilot contamination:
//   chi = tau_p * p_p * beta^2 / (tau_p * p_p * sum_{t in P_k} beta_{l,t} + sigma^2)
inline EstimateTable estimate_gains(const LargeScaleTable& beta,
                                    const PilotAssignment& pilots, int tau_p,
                                    double pilot_power, double sigma2) {
  EstimateTable est;
  est.num_aps = beta.num_aps;
  est.num_ues = beta.num_ues;
  est.chi.assign(beta.beta.size(), 0.0);
  const double tp = tau_p * pilot_power;
  for (int l = 0; l < beta.num_aps; ++l) {
    for (int k = 0; k < beta.num_ues; ++k) {
      double cont = 0.0;
      for (int t : pilots.cocontaminators[k]) cont += beta.at(l, t);
      double b = beta.at(l, k);
      est.at(l, k) = tp * b * b / (tp * cont + sigma2);
    }
  }
  return est;
}

// User-centric clusters per the cumulative-energy rule, restricted to APs
// flagged active. antenna_counts caps the strong set so tau_str <= m_l - 1.
inline ClusterMap build_clusters(const LargeScaleTable& beta,
                                 const EstimateTable& chi,
                                 const PilotAssignment& pilots, double fraction,
                                 int tau_p, const std::vector<int>& antenna_counts,
                                 const std::vector<char>& active_mask,
                                 double strong_threshold = 0.5) {
  const int L = beta.num_aps;
  const int K = beta.num_ues;
  ClusterMap cm;
  cm.serving_aps.assign(K, {});
  cm.served_ues.assign(L, {});
  cm.strong_set.assign(L, {});
  cm.tau_str.assign(L, 0);
  cm.strong_flag.assign(L, std::vector<char>(K, 0));

  std::vector<int> order;
  for (int k = 0; k < K; ++k) {
    order.clear();
    double total = 0.0;
    for (int l = 0; l < L; ++l) {
      if (!active_mask.empty() && !active_mask[l]) continue;
      order.push_back(l);
      total += beta.at(l, k);
    }
    if (order.empty() || total <= 0.0) continue;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (beta.at(a, k) != beta.at(b, k)) return beta.at(a, k) > beta.at(b, k);
      return a < b;
    });
    double acc = 0.0;
    for (int l : order) {
      cm.serving_aps[k].push_back(l);
      cm.served_ues[l].push_back(k);
      acc += beta.at(l, k);
      if (acc >= fraction * total) break;
    }
  }

  // Strong/weak split per AP: chi/beta ratio cut, then demote lowest ratios
  // until the distinct-pilot count fits tau_str <= min(tau_p, m_l - 1).
  for (int l = 0; l < L; ++l) {
    if (cm.served_ues[l].empty()) continue;
    std::vector<int> strong;
    for (int k : cm.served_ues[l]) {
      if (chi.at(l, k) / beta.at(l, k) >= strong_threshold) strong.push_back(k);
    }
    std::sort(strong.begin(), strong.end(), [&](int a, int b) {
      double ra = chi.at(l, a) / beta.at(l, a);
      double rb = chi.at(l, b) / beta.at(l, b);
      if (ra != rb) return ra > rb;
      return a < b;
    });
    const int m_l = antenna_counts.empty() ? tau_p + 1 : antenna_counts[l];
    const int cap = std::min(tau_p, std::max(0, m_l - 1));
    auto distinct_pilots = [&](const std::vector<int>& ues) {
      std::vector<char> seen(static_cast<std::size_t>(tau_p), 0);
      int n = 0;
      for (int k : ues) {
        if (!seen[pilots.pilot_of[k]]) {
          seen[pilots.pilot_of[k]] = 1;
          ++n;
        }
      }
      return n;
    };
    while (!strong.empty() && distinct_pilots(strong) > cap) {
      strong.pop_back();  // sorted by ratio desc: lowest-ratio UE goes first
    }
    for (int k : strong) {
      cm.strong_set[l].push_back(k);
      cm.strong_flag[l][k] = 1;
    }
    cm.tau_str[l] = distinct_pilots(strong);
  }
  return cm;
}

}  // namespace cfes
