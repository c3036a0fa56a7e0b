// Command-line front end: train, eval, figdata, validate-config.

#include <CLI11.hpp>

#include "cfes/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"cell-free massive MIMO energy-saving simulator and trainer"};
  app.require_subcommand(1);

  cfes::TrainOptions topt;
  CLI::App* train = app.add_subcommand("train", "train a policy");
  train->add_option("--config", topt.config_path, "scenario config file")
      ->required();
  train->add_option("--algo", topt.algo, "mappo or dqn")
      ->check(CLI::IsMember({"mappo", "dqn"}));
  train->add_option("--out", topt.out_dir, "output directory");
  std::uint64_t train_seed = 0;
  CLI::Option* ts = train->add_option("--seed", train_seed, "override rng seed");
  train->add_option("--resume", topt.resume_checkpoint,
                    "resume from checkpoint");
  train->add_flag("--quiet", topt.quiet, "suppress progress output");

  cfes::EvalOptions eopt;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a policy");
  eval->add_option("--config", eopt.config_path, "scenario config file")
      ->required();
  eval->add_option("--policy", eopt.policy,
                   "always-on | dac-sm1 | mappo:CKPT | dqn:CKPT")
      ->required();
  eval->add_option("--episodes", eopt.episodes, "paired-seed episodes");
  eval->add_option("--out", eopt.out_dir, "output directory");
  std::uint64_t eval_seed = 0;
  CLI::Option* es = eval->add_option("--seed", eval_seed, "override rng seed");
  eval->add_option("--reference", eopt.reference_summary,
                   "summary.json to compute percent savings against");
  eval->add_option("--trace-stride", eopt.trace_stride,
                   "emit every Nth decision step to trace.csv");
  eval->add_flag("--quiet", eopt.quiet, "suppress progress output");

  std::vector<std::string> run_dirs;
  std::string fig_out = "figdata";
  CLI::App* figdata =
      app.add_subcommand("figdata", "emit figure-ready CSVs from run dirs");
  figdata->add_option("run_dirs", run_dirs, "run directories with trace.csv")
      ->required();
  figdata->add_option("--out", fig_out, "output directory");

  std::string validate_path;
  CLI::App* validate =
      app.add_subcommand("validate-config", "check a config file");
  validate->add_option("config", validate_path, "scenario config file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    if (ts->count() > 0) topt.seed = train_seed;
    return cfes::cmd_train(topt);
  }
  if (eval->parsed()) {
    if (es->count() > 0) eopt.seed = eval_seed;
    return cfes::cmd_eval(eopt);
  }
  if (figdata->parsed()) return cfes::cmd_figdata(run_dirs, fig_out);
  if (validate->parsed()) return cfes::cmd_validate(validate_path);
  return 1;
}
