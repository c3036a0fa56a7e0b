#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

using namespace cfes;

TEST_CASE("allocation splits the antenna budget by estimate quality") {
  LargeScaleTable beta;
  beta.num_aps = 1;
  beta.num_ues = 2;
  beta.beta = {2e-9, 1e-9};
  PilotAssignment pa = assign_pilots(beta, 7);
  EstimateTable chi;
  chi.num_aps = 1;
  chi.num_ues = 2;
  chi.chi = {3e-10, 1e-10};
  std::vector<int> ants = {4};
  std::vector<char> tx = {1};
  ClusterMap cm = build_clusters(beta, chi, pa, 1.0, 7, ants, tx, 0.0);

  PowerAllocation alloc = allocate_power(cm, chi, ants, tx, 0.25);
  CHECK(alloc.row_sum(0) == doctest::Approx(1.0));  // 4 antennas * 0.25 W
  CHECK(alloc.at(0, 0) == doctest::Approx(0.75));
  CHECK(alloc.at(0, 1) == doctest::Approx(0.25));

  tx[0] = 0;
  PowerAllocation off = allocate_power(cm, chi, ants, tx, 0.25);
  CHECK(off.row_sum(0) == doctest::Approx(0.0));
}

TEST_CASE("allocation row sums equal m_l * p_a exactly when serving") {
  Rng rng = make_rng(23, "test-alloc");
  for (int rep = 0; rep < 20; ++rep) {
    auto inst = test::random_instance(6, 12, rng);
    for (int l = 0; l < 6; ++l) {
      bool serving = inst.active[l] && !inst.clusters.served_ues[l].empty();
      double expect = serving ? inst.antennas[l] * 0.25 : 0.0;
      CHECK(inst.alloc.row_sum(l) == doctest::Approx(expect).epsilon(1e-12));
      for (int k = 0; k < 12; ++k) {
        CHECK(inst.alloc.at(l, k) >= 0.0);
        if (inst.alloc.at(l, k) > 0.0) {
          bool member = false;
          for (int u : inst.clusters.served_ues[l]) {
            if (u == k) member = true;
          }
          CHECK(member);
        }
      }
    }
  }
}

TEST_CASE("single ap single ue reduces to the closed form") {
  LargeScaleTable beta;
  beta.num_aps = 1;
  beta.num_ues = 1;
  beta.beta = {1e-9};
  PilotAssignment pa = assign_pilots(beta, 7);
  double sigma2 = 3.98e-13;
  EstimateTable chi = estimate_gains(beta, pa, 7, 0.1, sigma2);
  std::vector<int> ants = {8};
  std::vector<char> tx = {1};
  ClusterMap cm = build_clusters(beta, chi, pa, 0.9, 7, ants, tx);
  PowerAllocation alloc = allocate_power(cm, chi, ants, tx, 0.25);

  REQUIRE(cm.is_strong(0, 0));
  REQUIRE(cm.tau_str[0] == 1);
  double p = 8 * 0.25;
  double num = (8 - 1) * p * chi.at(0, 0);
  double den = p * (beta.at(0, 0) - chi.at(0, 0)) + sigma2;
  RateReport rep = compute_sinr(cm, chi, beta, alloc, ants, pa, sigma2, 20e6,
                                193.0 / 200.0);
  CHECK(rep.sinr[0] == doctest::Approx(num / den).epsilon(1e-12));
  CHECK(rep.rate[0] ==
        doctest::Approx(0.965 * 20e6 * std::log2(1.0 + num / den)));
}

TEST_CASE("optimized sinr matches the quadruple-loop oracle") {
  Rng rng = make_rng(29, "test-sinr");
  double sigma2 = 3.98e-13;
  for (int rep = 0; rep < 50; ++rep) {
    auto inst = test::random_instance(8, 16, rng);
    RateReport fast =
        compute_sinr(inst.clusters, inst.chi, inst.beta, inst.alloc,
                     inst.antennas, inst.pilots, sigma2, 20e6, 0.965);
    RateReport slow =
        sinr_oracle(inst.clusters, inst.chi, inst.beta, inst.alloc,
                    inst.antennas, inst.pilots, sigma2, 20e6, 0.965);
    for (int k = 0; k < 16; ++k) {
      if (slow.sinr[k] == 0.0) {
        CHECK(fast.sinr[k] == 0.0);
      } else {
        CHECK(std::abs(fast.sinr[k] - slow.sinr[k]) / slow.sinr[k] < 1e-9);
      }
      CHECK(fast.rate[k] >= 0.0);
      CHECK((fast.rate[k] == 0.0) == (fast.sinr[k] == 0.0));
    }
  }
}

TEST_CASE("all aps silent yields zero sinr and zero rate") {
  Rng rng = make_rng(31, "test-silent");
  auto inst = test::random_instance(4, 6, rng, 7, false);
  std::vector<char> off(4, 0);
  PowerAllocation alloc =
      allocate_power(inst.clusters, inst.chi, inst.antennas, off, 0.25);
  RateReport rep = compute_sinr(inst.clusters, inst.chi, inst.beta, alloc,
                                inst.antennas, inst.pilots, 3.98e-13, 20e6,
                                0.965);
  for (int k = 0; k < 6; ++k) {
    CHECK(rep.sinr[k] == 0.0);
    CHECK(rep.rate[k] == 0.0);
  }
}

TEST_CASE("a transmitting ap with no zero-forcing headroom is rejected") {
  LargeScaleTable beta;
  beta.num_aps = 1;
  beta.num_ues = 1;
  beta.beta = {1e-9};
  PilotAssignment pa = assign_pilots(beta, 7);
  EstimateTable chi = estimate_gains(beta, pa, 7, 0.1, 3.98e-13);
  std::vector<int> ants = {2};
  std::vector<char> tx = {1};
  ClusterMap cm = build_clusters(beta, chi, pa, 0.9, 7, ants, tx);
  PowerAllocation alloc = allocate_power(cm, chi, ants, tx, 0.25);
  // Force the inconsistency the guard exists for.
  std::vector<int> shrunk = {1};
  CHECK_THROWS_AS(compute_sinr(cm, chi, beta, alloc, shrunk, pa, 3.98e-13,
                               20e6, 0.965),
                  PhyError);
}

TEST_CASE("uniform power scaling helps, someone else's power never does") {
  Rng rng = make_rng(37, "test-mono");
  auto inst = test::random_instance(6, 10, rng, 7, false);
  double sigma2 = 3.98e-13;
  RateReport base =
      compute_sinr(inst.clusters, inst.chi, inst.beta, inst.alloc,
                   inst.antennas, inst.pilots, sigma2, 20e6, 0.965);

  // Scaling every allocation by c > 1 scales signal and interference alike
  // but not the noise, so every served UE strictly improves.
  PowerAllocation scaled = inst.alloc;
  for (double& p : scaled.p) p *= 2.0;
  RateReport more =
      compute_sinr(inst.clusters, inst.chi, inst.beta, scaled, inst.antennas,
                   inst.pilots, sigma2, 20e6, 0.965);
  for (int k = 0; k < 10; ++k) {
    if (base.sinr[k] > 0.0) CHECK(more.sinr[k] > base.sinr[k]);
  }

  // Raising a different UE's power only adds interference toward UE k.
  int k = 0;
  REQUIRE(!inst.clusters.serving_aps[k].empty());
  int l = inst.clusters.serving_aps[k][0];
  int other = -1;
  for (int u : inst.clusters.served_ues[l]) {
    if (u != k) other = u;
  }
  if (other >= 0) {
    PowerAllocation bump = inst.alloc;
    bump.at(l, other) *= 2.0;
    RateReport worse =
        compute_sinr(inst.clusters, inst.chi, inst.beta, bump, inst.antennas,
                     inst.pilots, sigma2, 20e6, 0.965);
    CHECK(worse.sinr[k] <= base.sinr[k] * (1.0 + 1e-12));
  }
}
