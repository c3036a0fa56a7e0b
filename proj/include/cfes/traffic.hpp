#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfes/config.hpp"
#include "cfes/rng.hpp"

namespace cfes {

inline constexpr int kProfileBins = 72;  // 20-minute bins over 24 h
inline constexpr int kNumCategories = 3;

// Periodic diurnal demand-density curves, one per service category,
// kappa in Mbit/s/km^2 sampled at 20-minute bins.
struct TrafficProfile {
  std::array<std::vector<double>, kNumCategories> kappa;
  std::array<double, kNumCategories> delay_budget{0.050, 0.100, 0.150};

  double kappa_at(int category, double hour) const {
    double h = std::fmod(hour, 24.0);
    if (h < 0.0) h += 24.0;
    int bin = static_cast<int>(h * 3.0) % kProfileBins;
    return kappa[static_cast<std::size_t>(category)]
                [static_cast<std::size_t>(bin)];
  }
};

// Smooth diurnal curve: half-cosine rise from the trough hour to the peak
// hour, half-cosine fall back over the rest of the day. C^1-periodic.
inline double diurnal_density(double hour, const TrafficConfig& tc) {
  double h = std::fmod(hour - tc.trough_hour + 24.0, 24.0);
  double rise = std::fmod(tc.peak_hour - tc.trough_hour + 24.0, 24.0);
  double u;
  if (h <= rise) {
    u = 0.5 * (1.0 - std::cos(M_PI * h / rise));
  } else {
    u = 0.5 * (1.0 + std::cos(M_PI * (h - rise) / (24.0 - rise)));
  }
  return tc.trough_density + (tc.peak_density - tc.trough_density) * u;
}

inline TrafficProfile synth_profile(const TrafficConfig& tc) {
  TrafficProfile p;
  p.delay_budget = tc.delay_budget;
  double mix_total = tc.category_mix[0] + tc.category_mix[1] + tc.category_mix[2];
  for (int z = 0; z < kNumCategories; ++z) {
    p.kappa[z].resize(kProfileBins);
    double frac = tc.category_mix[static_cast<std::size_t>(z)] / mix_total;
    for (int b = 0; b < kProfileBins; ++b) {
      double hour = (b + 0.5) / 3.0;  // bin center
      p.kappa[z][static_cast<std::size_t>(b)] = frac * diurnal_density(hour, tc);
    }
  }
  return p;
}

// CSV ingestion: header "bin,category,kappa", 72 bins x 3 categories.
inline TrafficProfile load_profile_csv(const std::string& path,
                                       const TrafficConfig& tc) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open traffic profile: " + path);
  TrafficProfile p;
  p.delay_budget = tc.delay_budget;
  for (auto& v : p.kappa) v.assign(kProfileBins, -1.0);
  std::string line;
  std::getline(in, line);  // header
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string bin_s, cat_s, kappa_s;
    if (!std::getline(ss, bin_s, ',') || !std::getline(ss, cat_s, ',') ||
        !std::getline(ss, kappa_s, ',')) {
      throw ConfigError("traffic profile " + path + ": bad row at line " +
                        std::to_string(lineno));
    }
    int bin = std::stoi(bin_s);
    int cat = std::stoi(cat_s);
    double kappa = std::stod(kappa_s);
    if (bin < 0 || bin >= kProfileBins || cat < 0 || cat >= kNumCategories ||
        kappa < 0.0) {
      throw ConfigError("traffic profile " + path + ": out-of-range row at line " +
                        std::to_string(lineno));
    }
    p.kappa[static_cast<std::size_t>(cat)][static_cast<std::size_t>(bin)] = kappa;
  }
  for (int z = 0; z < kNumCategories; ++z) {
    for (int b = 0; b < kProfileBins; ++b) {
      if (p.kappa[z][static_cast<std::size_t>(b)] < 0.0)
        throw ConfigError("traffic profile " + path + ": missing bin " +
                          std::to_string(b) + " for category " + std::to_string(z));
    }
  }
  return p;
}

inline TrafficProfile make_profile(const ScenarioConfig& cfg) {
  if (cfg.traffic.source == "synthetic") return synth_profile(cfg.traffic);
  return load_profile_csv(cfg.traffic.source, cfg.traffic);
}

// Expected arrivals per timestep: lambda = kappa * A * dt / x_max.
inline double arrival_rate(const TrafficProfile& profile, int category,
                           double hour, double area_km2, double dt,
                           double demand_mbit) {
  return profile.kappa_at(category, hour) * area_km2 * dt / demand_mbit;
}

struct UESession {
  std::uint64_t id = 0;
  Point2 position;
  int category = 0;
  double demand_remaining = 0.0;  // Mbit
  double delay_remaining = 0.0;   // s
  double delay_budget = 0.0;      // s
  double demand_size = 0.0;       // Mbit
  std::uint64_t arrival_step = 0;
  std::vector<double> beta;  // per-AP large-scale gain, frozen for the session
};

struct Departure {
  std::uint64_t id = 0;
  int category = 0;
  double drop_fraction = 0.0;  // x_rem / x_max
  double rho = 0.0;            // r_ach / r_req
};

// Running account of departed sessions.
struct DropLedger {
  std::vector<Departure> departures;
  double drop_sum = 0.0;

  void record(const Departure& d) {
    departures.push_back(d);
    drop_sum += d.drop_fraction;
  }
  double mean_drop() const {
    return departures.empty() ? 0.0 : drop_sum / departures.size();
  }
};

inline Departure close_session(const UESession& s) {
  Departure d;
  d.id = s.id;
  d.category = s.category;
  d.drop_fraction = s.demand_remaining / s.demand_size;
  double elapsed = s.delay_budget - s.delay_remaining;
  double r_req = s.demand_size / s.delay_budget;
  double served = s.demand_size - s.demand_remaining;
  double r_ach = elapsed > 0.0 ? served / elapsed : 0.0;
  d.rho = r_ach / r_req;
  return d;
}

// One dt of service: drains demand at the supplied rates (Mbit/s), burns
// delay budget, and departs sessions that finish or expire.
inline std::vector<Departure> advance_sessions(std::vector<UESession>& sessions,
                                               const std::vector<double>& rate_mbps,
                                               double dt) {
  std::vector<Departure> departed;
  std::size_t w = 0;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    UESession& s = sessions[i];
    double served = rate_mbps[i] * dt;
    s.demand_remaining = std::max(0.0, s.demand_remaining - served);
    s.delay_remaining = std::max(0.0, s.delay_remaining - dt);
    if (s.demand_remaining <= 0.0 || s.delay_remaining <= 0.0) {
      departed.push_back(close_session(s));
    } else {
      if (w != i) sessions[w] = std::move(sessions[i]);
      ++w;
    }
  }
  sessions.resize(w);
  return departed;
}

inline int sample_poisson(double rate, Rng& rng) {
  if (rate <= 0.0) return 0;
  std::poisson_distribution<int> dist(rate);
  return dist(rng);
}

inline Point2 sample_position(double area_side, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, area_side);
  double x = u(rng);
  double y = u(rng);
  return {x, y};
}

}  // namespace cfes
