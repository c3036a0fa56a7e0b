#pragma once

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfes/baselines.hpp"
#include "cfes/mappo.hpp"
#include "cfes/metrics.hpp"

namespace cfes {

// Exit codes shared by the CLI: 0 ok, 2 config/validation/divergence
// failure, 3 missing checkpoint.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCheckpoint = 3;

struct TrainOptions {
  std::string config_path;
  std::string algo = "mappo";  // mappo | dqn
  std::string out_dir = "runs";
  std::optional<std::uint64_t> seed;
  std::string resume_checkpoint;  // empty = fresh start
  bool quiet = false;
};

struct EvalOptions {
  std::string config_path;
  std::string policy;  // always-on | dac-sm1 | mappo:CKPT | dqn:CKPT
  int episodes = 10;
  std::string out_dir = "runs";
  std::optional<std::uint64_t> seed;
  std::string reference_summary;  // compute percent savings against this
  int trace_stride = 1;
  bool quiet = false;
};

inline int cmd_train(const TrainOptions& opt, std::ostream& err = std::cerr,
                     fs::path* run_dir_out = nullptr) {
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(opt.config_path);
    if (opt.seed) cfg.rng_seed = *opt.seed;
    validate(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  fs::path dir = make_run_dir(opt.out_dir, "train-" + opt.algo + "-seed" +
                                               std::to_string(cfg.rng_seed));
  if (run_dir_out) *run_dir_out = dir;
  write_config_echo(dir, cfg);
  std::string echo = to_json(cfg).dump();

  try {
    if (opt.algo == "mappo") {
      MappoTrainer trainer(cfg, cfg.rng_seed);
      if (!opt.resume_checkpoint.empty()) {
        Checkpoint ck = load_checkpoint(opt.resume_checkpoint);
        if (ck.kind != "mappo" || ck.nets.size() != 2)
          throw TrainError("resume: not a mappo checkpoint");
        trainer.load_nets(ck.nets[0], ck.nets[1]);
      }
      std::ofstream curves(dir / "curves.csv");
      curves << kCurvesHeader << "\n";
      trainer.train([&](const IterationStats& st) {
        curves << curves_row(st) << "\n";
        if (!opt.quiet && st.iteration % 10 == 0) {
          err << "iter " << st.iteration << " reward " << st.mean_reward
              << " entropy " << st.entropy << " pnet " << st.mean_pnet << "\n";
        }
      });
      save_checkpoint((dir / "checkpoint.cfes").string(), "mappo", echo,
                      {trainer.actor(), trainer.critic()});
    } else if (opt.algo == "dqn") {
      DqnParams dp;
      DqnTrainer trainer(cfg, dp, cfg.rng_seed);
      std::ofstream curves(dir / "curves.csv");
      curves << "episode,env_timesteps,mean_reward,epsilon,td_loss,"
                "mean_pnet_w,drop_ratio\n";
      trainer.train([&](const DqnIterationStats& st) {
        curves << st.episode << ',' << st.env_timesteps << ','
               << fmt_g(st.mean_reward) << ',' << fmt_g(st.epsilon) << ','
               << fmt_g(st.td_loss) << ',' << fmt_g(st.mean_pnet) << ','
               << fmt_g(st.drop_ratio) << "\n";
        if (!opt.quiet && st.episode % 10 == 0) {
          err << "episode " << st.episode << " reward " << st.mean_reward
              << " eps " << st.epsilon << "\n";
        }
      });
      save_checkpoint((dir / "checkpoint.cfes").string(), "dqn", echo,
                      {trainer.qnet()});
    } else {
      err << "unknown algorithm: " << opt.algo << "\n";
      return kExitConfig;
    }
  } catch (const NnError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const TrainError& e) {
    err << "training failed: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

inline std::unique_ptr<Policy> make_policy(const std::string& spec,
                                           const ScenarioConfig& cfg,
                                           std::string* error) {
  if (spec == "always-on") return std::make_unique<AlwaysOnPolicy>();
  if (spec == "dac-sm1") return std::make_unique<DacSm1Policy>();
  auto colon = spec.find(':');
  std::string kind = spec.substr(0, colon);
  if (colon == std::string::npos || (kind != "mappo" && kind != "dqn")) {
    *error = "unknown policy spec: " + spec;
    return nullptr;
  }
  std::string path = spec.substr(colon + 1);
  Checkpoint ck;
  try {
    ck = load_checkpoint(path);
  } catch (const NnError& e) {
    *error = std::string("checkpoint: ") + e.what();
    return nullptr;
  }
  if (ck.kind != kind || ck.nets.empty()) {
    *error = "checkpoint kind mismatch for " + spec;
    return nullptr;
  }
  Environment probe(cfg);
  if (ck.nets[0].input_width() != probe.observation_width()) {
    *error = "checkpoint incompatible with config: observation width " +
             std::to_string(ck.nets[0].input_width()) + " vs " +
             std::to_string(probe.observation_width());
    return nullptr;
  }
  if (kind == "mappo") return std::make_unique<ActorPolicy>(ck.nets[0], true);
  return std::make_unique<DqnPolicy>(ck.nets[0]);
}

inline int cmd_eval(const EvalOptions& opt, std::ostream& err = std::cerr,
                    fs::path* run_dir_out = nullptr,
                    EvalSummary* summary_out = nullptr) {
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(opt.config_path);
    if (opt.seed) cfg.rng_seed = *opt.seed;
    validate(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  std::string perr;
  std::unique_ptr<Policy> policy = make_policy(opt.policy, cfg, &perr);
  if (!policy) {
    err << perr << "\n";
    return kExitCheckpoint;
  }

  std::string label = policy->name();
  fs::path dir = make_run_dir(opt.out_dir, "eval-" + label + "-seed" +
                                               std::to_string(cfg.rng_seed));
  if (run_dir_out) *run_dir_out = dir;
  write_config_echo(dir, cfg);

  std::ofstream trace(dir / "trace.csv");
  trace << kTraceHeader << "\n";
  EvalSummary sum = evaluate_policy(
      *policy, cfg, opt.episodes,
      [&](int ep, const StepInfo& info) { trace << trace_row(ep, info) << "\n"; },
      opt.trace_stride);
  if (summary_out) *summary_out = sum;

  json j = summary_json(sum);
  if (!opt.reference_summary.empty()) {
    std::ifstream ref_in(opt.reference_summary);
    if (!ref_in) {
      err << "cannot open reference summary: " << opt.reference_summary << "\n";
      return kExitConfig;
    }
    json ref = json::parse(ref_in);
    j["reference_policy"] = ref.at("policy");
    j["pc_savings_vs_reference_percent"] =
        percent_savings(sum.mean_pnet, ref.at("mean_pnet_w").get<double>());
  }
  std::ofstream summary(dir / "summary.json");
  summary << j.dump(2) << "\n";
  if (!opt.quiet) {
    err << label << ": mean pnet " << sum.mean_pnet << " W, drop "
        << sum.mean_drop << "\n";
  }
  return kExitOk;
}

inline int cmd_figdata(const std::vector<std::string>& run_dirs,
                       const std::string& out_dir,
                       std::ostream& err = std::cerr) {
  int rc = kExitOk;
  for (const std::string& rd : run_dirs) {
    try {
      fs::path out = fs::path(out_dir) / fs::path(rd).filename();
      emit_figdata(rd, out);
    } catch (const ConfigError& e) {
      err << rd << ": " << e.what() << "\n";
      rc = kExitConfig;
    }
  }
  return rc;
}

inline int cmd_validate(const std::string& config_path,
                        std::ostream& err = std::cerr) {
  try {
    ScenarioConfig cfg = load_scenario(config_path);
    validate(cfg);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace cfes
