#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "comix/tensor.hpp"

namespace comix {

struct CheckpointMeta {
  std::string config_hash;
  uint64_t episode = 0;
  uint64_t env_steps = 0;
  uint64_t seed = 0;
  std::string env_kind;
  uint32_t n_agents = 0;
  uint32_t obs_width = 0;
  bool comm_enabled = true;
  uint64_t q_opt_steps = 0;
  uint64_t c_opt_steps = 0;
};

// Versioned binary container: named parameter map (target-network entries
// under a "target/" prefix), optimizer accumulators, metadata. Writing the
// result of load_checkpoint reproduces the file byte for byte.
struct CheckpointData {
  CheckpointMeta meta;
  std::vector<std::pair<std::string, nn::Tensor>> params;
  std::vector<std::pair<std::string, nn::Tensor>> rms_acc;
};

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

}  // namespace comix
