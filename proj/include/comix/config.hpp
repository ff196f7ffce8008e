#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "comix/channel.hpp"
#include "comix/env.hpp"
#include "comix/trainer.hpp"

namespace comix {

// One experiment = env + training + channel sections plus output plumbing.
// Defaults reproduce the reference parameter tables for the chosen env
// kind; unknown sections or keys are rejected with line-level diagnostics.
struct ExperimentConfig {
  EnvConfig env = EnvConfig::switch_default();
  TrainConfig training = TrainConfig::defaults_for(EnvKind::Switch);
  ChannelConfig channel;
  std::string output_dir = "runs/out";
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  int eval_episodes = 100;
  int checkpoint_interval = 0;  // episodes between periodic checkpoints, 0 = final only

  static ExperimentConfig defaults_for(EnvKind k);
  static ExperimentConfig from_string(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);

  void validate() const;
  // Deterministic full serialization (parseable by from_string).
  std::string canonical() const;
  // Hex digest of the canonical form; stamped into checkpoints and metrics.
  std::string hash() const;
};

}  // namespace comix
