#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cfes/channel.hpp"

namespace cfes {

struct PhyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// p[l][k] in watts, nonzero only for k in K_l with AP l transmitting.
struct PowerAllocation {
  int num_aps = 0;
  int num_ues = 0;
  std::vector<double> p;

  double& at(int l, int k) { return p[static_cast<std::size_t>(l) * num_ues + k]; }
  double at(int l, int k) const {
    return p[static_cast<std::size_t>(l) * num_ues + k];
  }
  double row_sum(int l) const {
    double s = 0.0;
    for (int k = 0; k < num_ues; ++k) s += at(l, k);
    return s;
  }
};

struct RateReport {
  std::vector<double> sinr;  // per UE
  std::vector<double> rate;  // bits/s
  double prelog = 1.0;
};

// Channel-quality proportional split of the per-AP budget m_l * p_a.
// transmitting[l] = false (sleeping, waking, or m_l = 0) allocates nothing.
inline PowerAllocation allocate_power(const ClusterMap& clusters,
                                      const EstimateTable& chi,
                                      const std::vector<int>& antenna_counts,
                                      const std::vector<char>& transmitting,
                                      double p_a) {
  PowerAllocation alloc;
  alloc.num_aps = chi.num_aps;
  alloc.num_ues = chi.num_ues;
  alloc.p.assign(chi.chi.size(), 0.0);
  for (int l = 0; l < chi.num_aps; ++l) {
    if (!transmitting.empty() && !transmitting[l]) continue;
    if (antenna_counts[l] <= 0 || clusters.served_ues[l].empty()) continue;
    double denom = 0.0;
    for (int k : clusters.served_ues[l]) denom += chi.at(l, k);
    if (denom <= 0.0) continue;
    const double budget = antenna_counts[l] * p_a;
    for (int k : clusters.served_ues[l]) {
      alloc.at(l, k) = budget * chi.at(l, k) / denom;
    }
  }
  return alloc;
}

namespace detail {

inline void check_ppzf_precondition(const PowerAllocation& alloc,
                                    const std::vector<int>& antenna_counts,
                                    const std::vector<int>& tau_str) {
  for (int l = 0; l < alloc.num_aps; ++l) {
    if (alloc.row_sum(l) > 0.0 && antenna_counts[l] <= tau_str[l]) {
      throw PhyError("PPZF precondition violated: m_l <= tau_str_l at AP " +
                     std::to_string(l));
    }
  }
}

}  // namespace detail

// Hardened PPZF SINR. The non-coherent interference sum collapses per AP:
//   sum_t sum_l p_{l,t} (beta_{l,k} - delta_{l,k} chi_{l,k})
//     = sum_l P_l (beta_{l,k} - delta_{l,k} chi_{l,k}),
// which is the only deviation from the literal quadruple-loop oracle below.
inline RateReport compute_sinr(const ClusterMap& clusters,
                               const EstimateTable& chi,
                               const LargeScaleTable& beta,
                               const PowerAllocation& alloc,
                               const std::vector<int>& antenna_counts,
                               const PilotAssignment& pilots, double sigma2,
                               double bandwidth, double prelog) {
  const int L = beta.num_aps;
  const int K = beta.num_ues;
  detail::check_ppzf_precondition(alloc, antenna_counts, clusters.tau_str);

  std::vector<double> ap_total(static_cast<std::size_t>(L), 0.0);
  std::vector<double> zf_gain(static_cast<std::size_t>(L), 0.0);
  for (int l = 0; l < L; ++l) {
    ap_total[l] = alloc.row_sum(l);
    zf_gain[l] = std::max(0, antenna_counts[l] - clusters.tau_str[l]);
  }

  RateReport rep;
  rep.prelog = prelog;
  rep.sinr.assign(K, 0.0);
  rep.rate.assign(K, 0.0);
  for (int k = 0; k < K; ++k) {
    double num = 0.0;
    for (int l : clusters.serving_aps[k]) {
      num += std::sqrt(zf_gain[l] * alloc.at(l, k) * chi.at(l, k));
    }
    num *= num;

    double coherent = 0.0;
    for (int t : pilots.cocontaminators[k]) {
      if (t == k) continue;
      double s = 0.0;
      for (int l : clusters.serving_aps[t]) {
        s += std::sqrt(zf_gain[l] * alloc.at(l, t) * chi.at(l, k));
      }
      coherent += s * s;
    }

    double noncoherent = 0.0;
    for (int l = 0; l < L; ++l) {
      if (ap_total[l] <= 0.0) continue;
      double leak = beta.at(l, k);
      if (clusters.is_strong(l, k)) leak -= chi.at(l, k);
      noncoherent += ap_total[l] * leak;
    }

    double denom = coherent + noncoherent + sigma2;
    rep.sinr[k] = num > 0.0 ? num / denom : 0.0;
    rep.rate[k] = prelog * bandwidth * std::log2(1.0 + rep.sinr[k]);
  }
  return rep;
}

// Unoptimized transcription of the closed-form SINR: quadruple loops over all
// APs and UEs. Test oracle only; keep independent of compute_sinr.
inline RateReport sinr_oracle(const ClusterMap& clusters,
                              const EstimateTable& chi,
                              const LargeScaleTable& beta,
                              const PowerAllocation& alloc,
                              const std::vector<int>& antenna_counts,
                              const PilotAssignment& pilots, double sigma2,
                              double bandwidth, double prelog) {
  const int L = beta.num_aps;
  const int K = beta.num_ues;
  RateReport rep;
  rep.prelog = prelog;
  rep.sinr.assign(K, 0.0);
  rep.rate.assign(K, 0.0);
  for (int k = 0; k < K; ++k) {
    double num = 0.0;
    for (int l = 0; l < L; ++l) {
      double g = antenna_counts[l] - clusters.tau_str[l];
      if (g < 0.0) g = 0.0;
      num += std::sqrt(g * alloc.at(l, k) * chi.at(l, k));
    }
    num = num * num;

    double denom = sigma2;
    for (int t = 0; t < K; ++t) {
      bool shares_pilot = false;
      for (int u : pilots.cocontaminators[k]) {
        if (u == t) shares_pilot = true;
      }
      if (shares_pilot && t != k) {
        double s = 0.0;
        for (int l = 0; l < L; ++l) {
          double g = antenna_counts[l] - clusters.tau_str[l];
          if (g < 0.0) g = 0.0;
          s += std::sqrt(g * alloc.at(l, t) * chi.at(l, k));
        }
        denom += s * s;
      }
    }
    for (int t = 0; t < K; ++t) {
      for (int l = 0; l < L; ++l) {
        double delta = clusters.is_strong(l, k) ? 1.0 : 0.0;
        denom += alloc.at(l, t) * (beta.at(l, k) - delta * chi.at(l, k));
      }
    }
    rep.sinr[k] = num > 0.0 ? num / denom : 0.0;
    rep.rate[k] = prelog * bandwidth * std::log2(1.0 + rep.sinr[k]);
  }
  return rep;
}

}  // namespace cfes
