#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "comix/rng.hpp"

namespace comix {

enum class EnvKind { Switch, Transport, PredatorPrey };

std::string env_kind_name(EnvKind k);
EnvKind env_kind_from_name(const std::string& name);

// Actions: 0 up, 1 down, 2 left, 3 right, 4 stay. Grid coordinates are
// x right, y down; "up" decrements y.
inline constexpr int kNumActions = 5;
inline constexpr int kActionDx[kNumActions] = {0, 0, -1, 1, 0};
inline constexpr int kActionDy[kNumActions] = {-1, 1, 0, 0, 0};

struct Cell {
  int x = 0, y = 0;
  bool operator==(const Cell&) const = default;
  auto operator<=>(const Cell&) const = default;
};

struct EnvConfig {
  EnvKind kind = EnvKind::Switch;
  int width = 7, height = 3;
  int n_agents = 4;
  int n_entities = 0;  // loads or prey
  int obs_width = 4;
  int n_actions = kNumActions;
  double step_reward = 0.0;
  double intermediary_reward = 0.0;
  double goal_reward = 5.0;
  double obstacle_fraction = 0.0;
  int step_limit = 50;

  static EnvConfig switch_default();
  static EnvConfig transport_default();      // 16x10, 4 agents, 2 loads
  static EnvConfig predator_prey_default();  // 12x12, 4 agents, 16 prey
  void validate() const;
};

struct StepResult {
  std::vector<std::vector<double>> obs;  // zero vector for done agents
  std::vector<double> rewards;
  std::vector<bool> agent_done;
  bool episode_done = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvConfig& config() const = 0;
  // Starts a fresh episode; layout and step randomness derive from `seed`.
  virtual std::vector<std::vector<double>> reset(uint64_t seed) = 0;
  virtual StepResult step(const std::vector<int>& actions) = 0;
  virtual bool agent_alive(int agent) const = 0;
  virtual int steps_taken() const = 0;
  virtual bool episode_over() const = 0;
  // Per-environment success measure for the episode so far: normalized team
  // reward (Switch), completion percentage (Transport), prey captured
  // (Predator-Prey).
  virtual double headline_metric() const = 0;
  virtual double team_return() const = 0;
  // Compact single-line JSON of positions for trajectory dumps.
  virtual std::string state_record() const = 0;
};

std::unique_ptr<Env> make_env(const EnvConfig& cfg);

namespace env_detail {
// Priority order for simultaneous-move resolution: a fresh random
// permutation per step from the env's seeded generator.
std::vector<int> priority_permutation(int n, Rng& rng);
}  // namespace env_detail

}  // namespace comix
