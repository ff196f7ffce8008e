#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "comix/harness.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<uint64_t> seeds;
  std::string checkpoint;
  int episodes = 0;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_checkpoint) {
  cmd->add_option("-c,--config", a.config_path, "experiment config file")
      ->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", a.out_dir, "output directory (overrides config)");
  cmd->add_option("-s,--seed", a.seeds, "seed list (overrides config)");
  if (needs_checkpoint)
    cmd->add_option("-k,--checkpoint", a.checkpoint, "trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
}

comix::ExperimentConfig resolve(const CommonArgs& a, const std::string& env_kind) {
  comix::ExperimentConfig cfg;
  if (!a.config_path.empty())
    cfg = comix::ExperimentConfig::from_file(a.config_path);
  else if (!env_kind.empty())
    cfg = comix::ExperimentConfig::defaults_for(comix::env_kind_from_name(env_kind));
  else
    throw comix::ConfigError("pass --config FILE or --env {switch|transport|predator_prey}");
  if (!a.out_dir.empty()) cfg.output_dir = a.out_dir;
  if (!a.seeds.empty()) cfg.seeds = a.seeds;
  if (a.episodes > 0) cfg.training.episodes = a.episodes;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decentralized coordination trainer"};
  app.require_subcommand(1);

  CommonArgs ta, ea, da, ca, fa;
  std::string ta_env, ea_env, da_env, ca_env, fa_env;
  std::vector<int> noisy_counts = {0, 4};
  int eval_episodes = 0;

  auto* train = app.add_subcommand("train", "train across seeds and report");
  add_common(train, ta, false);
  train->add_option("--env", ta_env, "use built-in defaults for this environment");
  train->add_option("-e,--episodes", ta.episodes, "episode budget per seed");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, ea, true);
  eval->add_option("--env", ea_env, "use built-in defaults for this environment");
  eval->add_option("-e,--episodes", eval_episodes, "evaluation episodes");

  auto* disrupt = app.add_subcommand("disrupt", "evaluate across channel usage levels");
  add_common(disrupt, da, true);
  disrupt->add_option("--env", da_env, "use built-in defaults for this environment");

  auto* comm = app.add_subcommand("comm-analysis",
                                  "mask acceptance statistics, optionally with noise");
  add_common(comm, ca, true);
  comm->add_option("--env", ca_env, "use built-in defaults for this environment");
  comm->add_option("--noisy", noisy_counts, "noisy-agent counts to compare");

  auto* finetune = app.add_subcommand("finetune", "adapt a policy to a degraded channel");
  add_common(finetune, fa, true);
  finetune->add_option("--env", fa_env, "use built-in defaults for this environment");
  finetune->add_option("-e,--episodes", fa.episodes, "fine-tune episode budget");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return comix::run_train(resolve(ta, ta_env), std::cout);
    if (*eval)
      return comix::run_eval(resolve(ea, ea_env), ea.checkpoint, eval_episodes,
                             std::cout);
    if (*disrupt) return comix::run_disrupt(resolve(da, da_env), da.checkpoint, std::cout);
    if (*comm)
      return comix::run_comm_analysis(resolve(ca, ca_env), ca.checkpoint, noisy_counts,
                                      std::cout);
    if (*finetune) return comix::run_finetune(resolve(fa, fa_env), fa.checkpoint, std::cout);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}
