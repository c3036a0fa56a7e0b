#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cfes/config.hpp"
#include "cfes/env.hpp"
#include "cfes/mappo.hpp"

namespace cfes {

namespace fs = std::filesystem;

// Stable shortest-roundtrip formatting so reruns are byte-identical.
inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::uint64_t config_hash(const ScenarioConfig& cfg) {
  return detail::fnv1a(to_json(cfg).dump());
}

// Append-only run directories: an existing name gets a numeric suffix.
inline fs::path make_run_dir(const fs::path& base, const std::string& label) {
  fs::create_directories(base);
  fs::path dir = base / label;
  int suffix = 0;
  while (fs::exists(dir)) {
    dir = base / (label + "-" + std::to_string(++suffix));
  }
  fs::create_directories(dir);
  return dir;
}

inline void write_config_echo(const fs::path& dir, const ScenarioConfig& cfg) {
  json j{{"config", to_json(cfg)},
         {"config_hash", fmt_g(static_cast<double>(config_hash(cfg)))},
         {"config_hash_hex", [&] {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%016llx",
                          static_cast<unsigned long long>(config_hash(cfg)));
            return std::string(buf);
          }()}};
  std::ofstream out(dir / "config.json");
  out << j.dump(2) << "\n";
}

inline constexpr const char* kTraceHeader =
    "episode,time_s,pnet_w,ap_w,cloud_w,num_ues,drop_mean,"
    "sm0,sm1,sm2,sm3,mean_active_antennas,demand_rate_mbps";

inline std::string trace_row(int episode, const StepInfo& info) {
  std::ostringstream ss;
  ss << episode << ',' << fmt_g(info.time_s) << ',' << fmt_g(info.pnet_mean)
     << ',' << fmt_g(info.ap_power_mean) << ',' << fmt_g(info.cloud_power_mean)
     << ',' << info.num_ues << ',' << fmt_g(info.drop_running_mean) << ','
     << info.mode_counts[0] << ',' << info.mode_counts[1] << ','
     << info.mode_counts[2] << ',' << info.mode_counts[3] << ','
     << fmt_g(info.mean_active_antennas) << ','
     << fmt_g(info.demand_rate_total);
  return ss.str();
}

inline constexpr const char* kCurvesHeader =
    "iteration,env_timesteps,mean_reward,entropy,policy_objective,"
    "value_loss,mean_pnet_w,drop_ratio";

inline std::string curves_row(const IterationStats& st) {
  std::ostringstream ss;
  ss << st.iteration << ',' << st.env_timesteps << ',' << fmt_g(st.mean_reward)
     << ',' << fmt_g(st.entropy) << ',' << fmt_g(st.policy_objective) << ','
     << fmt_g(st.value_loss) << ',' << fmt_g(st.mean_pnet) << ','
     << fmt_g(st.drop_ratio);
  return ss.str();
}

inline json summary_json(const EvalSummary& s) {
  return json{{"policy", s.policy},
              {"episodes", s.episodes},
              {"mean_pnet_w", s.mean_pnet},
              {"mean_ap_power_w", s.mean_ap_power},
              {"mean_cloud_power_w", s.mean_cloud_power},
              {"mean_drop_ratio", s.mean_drop},
              {"mode_fraction", s.mode_fraction},
              {"mean_active_antennas", s.mean_active_antennas},
              {"mean_reward", s.mean_reward}};
}

inline double percent_savings(double value, double reference) {
  if (reference == 0.0) return 0.0;
  return 100.0 * (reference - value) / reference;
}

// --- figure-data emission -----------------------------------------------------

struct TraceData {
  std::vector<int> episode;
  std::vector<double> time_s, pnet, ap_w, cloud_w, drop, antennas, demand;
  std::vector<std::array<int, 4>> modes;
  std::vector<int> num_ues;
};

inline TraceData read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace: " + path.string());
  TraceData d;
  std::string line;
  std::getline(in, line);
  if (line != kTraceHeader)
    throw ConfigError("unexpected trace header in " + path.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (cols.size() != 13)
      throw ConfigError("bad trace row in " + path.string());
    d.episode.push_back(std::stoi(cols[0]));
    d.time_s.push_back(std::stod(cols[1]));
    d.pnet.push_back(std::stod(cols[2]));
    d.ap_w.push_back(std::stod(cols[3]));
    d.cloud_w.push_back(std::stod(cols[4]));
    d.num_ues.push_back(std::stoi(cols[5]));
    d.drop.push_back(std::stod(cols[6]));
    d.modes.push_back({std::stoi(cols[7]), std::stoi(cols[8]),
                       std::stoi(cols[9]), std::stoi(cols[10])});
    d.antennas.push_back(std::stod(cols[11]));
    d.demand.push_back(std::stod(cols[12]));
  }
  return d;
}

// Emits four figure-ready CSVs from a run directory containing trace.csv:
// sleep-mode counts over time, demand rate, mean active antennas, and the
// PC/drop bar data.
inline std::vector<fs::path> emit_figdata(const fs::path& run_dir,
                                          const fs::path& out_dir) {
  TraceData d = read_trace_csv(run_dir / "trace.csv");
  fs::create_directories(out_dir);
  std::vector<fs::path> written;

  {
    fs::path p = out_dir / "fig_sleep_modes.csv";
    std::ofstream out(p);
    out << "episode,time_s,sm0,sm1,sm2,sm3\n";
    for (std::size_t i = 0; i < d.time_s.size(); ++i) {
      out << d.episode[i] << ',' << fmt_g(d.time_s[i]) << ',' << d.modes[i][0]
          << ',' << d.modes[i][1] << ',' << d.modes[i][2] << ','
          << d.modes[i][3] << "\n";
    }
    written.push_back(p);
  }
  {
    fs::path p = out_dir / "fig_demand_rate.csv";
    std::ofstream out(p);
    out << "episode,time_s,demand_rate_mbps\n";
    for (std::size_t i = 0; i < d.time_s.size(); ++i) {
      out << d.episode[i] << ',' << fmt_g(d.time_s[i]) << ','
          << fmt_g(d.demand[i]) << "\n";
    }
    written.push_back(p);
  }
  {
    fs::path p = out_dir / "fig_antennas.csv";
    std::ofstream out(p);
    out << "episode,time_s,mean_active_antennas\n";
    for (std::size_t i = 0; i < d.time_s.size(); ++i) {
      out << d.episode[i] << ',' << fmt_g(d.time_s[i]) << ','
          << fmt_g(d.antennas[i]) << "\n";
    }
    written.push_back(p);
  }
  {
    // Bar data: time averages over the whole trace.
    double pnet = 0.0, drop_last = 0.0;
    for (std::size_t i = 0; i < d.pnet.size(); ++i) pnet += d.pnet[i];
    if (!d.pnet.empty()) pnet /= static_cast<double>(d.pnet.size());
    if (!d.drop.empty()) drop_last = d.drop.back();
    fs::path p = out_dir / "fig_kpi.csv";
    std::ofstream out(p);
    out << "mean_pnet_w,final_drop_ratio\n";
    out << fmt_g(pnet) << ',' << fmt_g(drop_last) << "\n";
    written.push_back(p);
  }
  return written;
}

}  // namespace cfes
