#include "comix/env.hpp"

#include <algorithm>
#include <numeric>

#include "comix/envs.hpp"
#include "comix/errors.hpp"

namespace comix {

std::string env_kind_name(EnvKind k) {
  switch (k) {
    case EnvKind::Switch: return "switch";
    case EnvKind::Transport: return "transport";
    case EnvKind::PredatorPrey: return "predator_prey";
  }
  throw ContractViolation("env_kind_name: bad enum");
}

EnvKind env_kind_from_name(const std::string& name) {
  if (name == "switch") return EnvKind::Switch;
  if (name == "transport") return EnvKind::Transport;
  if (name == "predator_prey") return EnvKind::PredatorPrey;
  throw ConfigError("unknown environment kind: " + name +
                    " (expected switch|transport|predator_prey)");
}

EnvConfig EnvConfig::switch_default() {
  EnvConfig c;
  c.kind = EnvKind::Switch;
  c.width = 7;
  c.height = 3;
  c.n_agents = 4;
  c.n_entities = 0;
  c.obs_width = 4;
  c.step_reward = 0.0;
  c.intermediary_reward = 0.0;
  c.goal_reward = 5.0;
  c.obstacle_fraction = 0.0;
  c.step_limit = 50;
  return c;
}

EnvConfig EnvConfig::transport_default() {
  EnvConfig c;
  c.kind = EnvKind::Transport;
  c.width = 16;
  c.height = 10;
  c.n_agents = 4;
  c.n_entities = 2;
  c.obs_width = 30;
  c.step_reward = 0.0;
  c.intermediary_reward = 0.5;
  c.goal_reward = 5.0;
  c.obstacle_fraction = 0.10;
  c.step_limit = 100;
  return c;
}

EnvConfig EnvConfig::predator_prey_default() {
  EnvConfig c;
  c.kind = EnvKind::PredatorPrey;
  c.width = 12;
  c.height = 12;
  c.n_agents = 4;
  c.n_entities = 16;
  c.obs_width = 77;
  c.step_reward = 0.0;
  c.intermediary_reward = 0.1;
  c.goal_reward = 5.0;
  c.obstacle_fraction = 0.0;
  c.step_limit = 200;
  return c;
}

void EnvConfig::validate() const {
  if (n_actions != kNumActions)
    throw ConfigError("env: action count must be 5");
  if (width < 2 || height < 1) throw ConfigError("env: map too small");
  if (n_agents < 1) throw ConfigError("env: need at least one agent");
  if (step_limit < 1) throw ConfigError("env: step limit must be positive");
  switch (kind) {
    case EnvKind::Switch:
      if (obs_width != 4) throw ConfigError("switch: observation width must be 4");
      break;
    case EnvKind::Transport:
      if (obs_width != 30) throw ConfigError("transport: observation width must be 30");
      if (n_agents % 2 != 0 || n_entities != n_agents / 2)
        throw ConfigError("transport: agents come in carrier pairs, one load per pair");
      break;
    case EnvKind::PredatorPrey:
      if (obs_width != 77) throw ConfigError("predator_prey: observation width must be 77");
      if (n_entities < 1) throw ConfigError("predator_prey: need at least one prey");
      break;
  }
}

std::unique_ptr<Env> make_env(const EnvConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case EnvKind::Switch: return std::make_unique<SwitchEnv>(cfg);
    case EnvKind::Transport: return std::make_unique<TransportEnv>(cfg);
    case EnvKind::PredatorPrey: return std::make_unique<PredatorPreyEnv>(cfg);
  }
  throw ContractViolation("make_env: bad enum");
}

namespace env_detail {
std::vector<int> priority_permutation(int n, Rng& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}
}  // namespace env_detail

}  // namespace comix
