#pragma once

#include <random>
#include <vector>

#include "cfes/channel.hpp"
#include "cfes/phy.hpp"
#include "cfes/rng.hpp"

namespace cfes::test {

// A consistent random PHY instance: log-uniform gains, pilots, MMSE
// estimates, clusters over a random active/antenna state, and the power
// allocation, all built through the production path.
struct PhyInstance {
  LargeScaleTable beta;
  PilotAssignment pilots;
  EstimateTable chi;
  ClusterMap clusters;
  PowerAllocation alloc;
  std::vector<int> antennas;
  std::vector<char> active;
  double sigma2 = 3.98e-13;
  int tau_p = 7;
};

inline PhyInstance random_instance(int L, int K, Rng& rng, int tau_p = 7,
                                   bool random_sleep = true) {
  PhyInstance inst;
  inst.tau_p = tau_p;
  inst.beta.num_aps = L;
  inst.beta.num_ues = K;
  inst.beta.beta.resize(static_cast<std::size_t>(L) * K);
  std::uniform_real_distribution<double> logu(-12.0, -8.0);
  for (double& b : inst.beta.beta) b = std::pow(10.0, logu(rng));
  inst.pilots = assign_pilots(inst.beta, tau_p);
  inst.chi = estimate_gains(inst.beta, inst.pilots, tau_p, 0.1, inst.sigma2);

  std::uniform_int_distribution<int> ant(1, 8);
  std::uniform_int_distribution<int> coin(0, 3);
  inst.antennas.resize(static_cast<std::size_t>(L));
  inst.active.resize(static_cast<std::size_t>(L));
  bool any_active = false;
  for (int l = 0; l < L; ++l) {
    inst.antennas[l] = ant(rng);
    inst.active[l] = random_sleep ? (coin(rng) != 0 ? 1 : 0) : 1;
    if (inst.active[l]) any_active = true;
  }
  if (!any_active) inst.active[0] = 1;

  inst.clusters = build_clusters(inst.beta, inst.chi, inst.pilots, 0.9, tau_p,
                                 inst.antennas, inst.active);
  inst.alloc =
      allocate_power(inst.clusters, inst.chi, inst.antennas, inst.active, 0.25);
  return inst;
}

}  // namespace cfes::test
