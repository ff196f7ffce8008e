#pragma once

#include "comix/env.hpp"

namespace comix {

// 7x3 map split by a wall with a one-cell-high corridor at a row that is
// resampled every episode and never observable. Four agents start in the
// corners and must reach the horizontally mirrored corner.
class SwitchEnv : public Env {
 public:
  explicit SwitchEnv(const EnvConfig& cfg);
  const EnvConfig& config() const override { return cfg_; }
  std::vector<std::vector<double>> reset(uint64_t seed) override;
  StepResult step(const std::vector<int>& actions) override;
  bool agent_alive(int agent) const override { return !done_[agent]; }
  int steps_taken() const override { return steps_; }
  bool episode_over() const override { return episode_done_; }
  double headline_metric() const override;  // team return / (n * goal reward)
  double team_return() const override { return team_return_; }
  std::string state_record() const override;

  int corridor_row() const { return corridor_row_; }
  Cell agent_pos(int i) const { return pos_[i]; }
  Cell agent_target(int i) const { return target_[i]; }
  bool passable(Cell c) const;

 private:
  std::vector<double> observe(int i) const;

  EnvConfig cfg_;
  Rng step_rng_;
  std::vector<Cell> pos_, target_;
  std::vector<bool> done_;
  int corridor_row_ = 1;
  int steps_ = 0;
  bool episode_done_ = false;
  double team_return_ = 0.0;
};

// 16x10 map with rigid vertical trios [carrier | load | carrier]. A trio
// shifts one cell when both carriers emit the same direction and the three
// destination cells are free. Delivering the load to the goal finishes the
// pair; obstacles cover ~10% of cells, sampled so every trio can reach the
// goal as a rigid body.
class TransportEnv : public Env {
 public:
  explicit TransportEnv(const EnvConfig& cfg);
  const EnvConfig& config() const override { return cfg_; }
  std::vector<std::vector<double>> reset(uint64_t seed) override;
  StepResult step(const std::vector<int>& actions) override;
  bool agent_alive(int agent) const override { return !delivered_[agent / 2]; }
  int steps_taken() const override { return steps_; }
  bool episode_over() const override { return episode_done_; }
  double headline_metric() const override;  // delivered loads percentage
  double team_return() const override { return team_return_; }
  std::string state_record() const override;

  Cell goal() const { return goal_; }
  Cell load_pos(int k) const { return load_[k]; }
  Cell carrier_pos(int agent) const;
  bool load_delivered(int k) const { return delivered_[k]; }
  const std::set<Cell>& obstacles() const { return obstacles_; }
  // Test hook: replaces the sampled layout with an explicit one.
  void set_layout_for_test(const std::vector<Cell>& loads, Cell goal,
                           const std::set<Cell>& obstacles);

 private:
  std::vector<double> observe(int agent) const;
  bool trio_cells_free(int k, Cell load_dest, bool ignore_self) const;
  bool rigid_path_exists(Cell from, Cell to) const;
  void sample_layout(uint64_t seed);

  EnvConfig cfg_;
  Rng step_rng_;
  int n_loads_ = 2;
  std::vector<Cell> load_;
  std::vector<bool> delivered_;
  std::vector<int> min_goal_dist_;
  Cell goal_{};
  std::set<Cell> obstacles_;
  int steps_ = 0;
  bool episode_done_ = false;
  double team_return_ = 0.0;
};

// Open 12x12 (or larger) map: predators herd randomly moving prey; a prey
// with predators on all four orthogonal neighbors is captured. Bumping into
// a prey blocks the move and pays the small intermediary reward.
class PredatorPreyEnv : public Env {
 public:
  explicit PredatorPreyEnv(const EnvConfig& cfg);
  const EnvConfig& config() const override { return cfg_; }
  std::vector<std::vector<double>> reset(uint64_t seed) override;
  StepResult step(const std::vector<int>& actions) override;
  bool agent_alive(int) const override { return !episode_done_; }
  int steps_taken() const override { return steps_; }
  bool episode_over() const override { return episode_done_; }
  double headline_metric() const override { return captured_; }
  double team_return() const override { return team_return_; }
  std::string state_record() const override;

  Cell predator_pos(int i) const { return pred_[i]; }
  const std::vector<Cell>& prey_positions() const { return prey_; }
  int captured() const { return captured_; }
  // Test hook: replaces the sampled layout with explicit positions.
  void set_layout_for_test(const std::vector<Cell>& predators,
                           const std::vector<Cell>& prey);

 private:
  std::vector<double> observe(int agent) const;
  bool occupied(Cell c) const;

  EnvConfig cfg_;
  Rng step_rng_;
  std::vector<Cell> pred_;
  std::vector<Cell> prey_;
  int captured_ = 0;
  int steps_ = 0;
  bool episode_done_ = false;
  double team_return_ = 0.0;
};

}  // namespace comix
