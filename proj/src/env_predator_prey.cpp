#include <algorithm>
#include <sstream>

#include "comix/envs.hpp"
#include "comix/errors.hpp"

namespace comix {

PredatorPreyEnv::PredatorPreyEnv(const EnvConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  reset(0);
}

bool PredatorPreyEnv::occupied(Cell c) const {
  for (const Cell& p : pred_)
    if (p == c) return true;
  for (const Cell& p : prey_)
    if (p == c) return true;
  return false;
}

std::vector<std::vector<double>> PredatorPreyEnv::reset(uint64_t seed) {
  Rng layout = make_rng(seed, "pp.layout");
  step_rng_ = make_rng(seed, "pp.step");
  std::vector<Cell> cells;
  for (int y = 0; y < cfg_.height; ++y)
    for (int x = 0; x < cfg_.width; ++x) cells.push_back({x, y});
  std::shuffle(cells.begin(), cells.end(), layout);
  if (static_cast<int>(cells.size()) < cfg_.n_agents + cfg_.n_entities)
    throw ConfigError("predator_prey: map too small for agents + prey");
  pred_.assign(cells.begin(), cells.begin() + cfg_.n_agents);
  prey_.assign(cells.begin() + cfg_.n_agents,
               cells.begin() + cfg_.n_agents + cfg_.n_entities);
  captured_ = 0;
  steps_ = 0;
  episode_done_ = false;
  team_return_ = 0.0;
  std::vector<std::vector<double>> obs;
  for (int i = 0; i < cfg_.n_agents; ++i) obs.push_back(observe(i));
  return obs;
}

void PredatorPreyEnv::set_layout_for_test(const std::vector<Cell>& predators,
                                          const std::vector<Cell>& prey) {
  if (static_cast<int>(predators.size()) != cfg_.n_agents)
    throw ContractViolation("pp test layout: predator count mismatch");
  pred_ = predators;
  prey_ = prey;
  captured_ = 0;
  steps_ = 0;
  episode_done_ = false;
  team_return_ = 0.0;
}

std::vector<double> PredatorPreyEnv::observe(int agent) const {
  const Cell me = pred_[agent];
  std::vector<double> o;
  o.reserve(cfg_.obs_width);
  // Three 5x5 channels: predators, prey, obstacles/out-of-bounds.
  for (int dy = -2; dy <= 2; ++dy)
    for (int dx = -2; dx <= 2; ++dx) {
      Cell c{me.x + dx, me.y + dy};
      bool hit = false;
      for (const Cell& p : pred_) hit = hit || p == c;
      o.push_back(hit ? 1.0 : 0.0);
    }
  for (int dy = -2; dy <= 2; ++dy)
    for (int dx = -2; dx <= 2; ++dx) {
      Cell c{me.x + dx, me.y + dy};
      bool hit = false;
      for (const Cell& p : prey_) hit = hit || p == c;
      o.push_back(hit ? 1.0 : 0.0);
    }
  for (int dy = -2; dy <= 2; ++dy)
    for (int dx = -2; dx <= 2; ++dx) {
      Cell c{me.x + dx, me.y + dy};
      bool oob = c.x < 0 || c.x >= cfg_.width || c.y < 0 || c.y >= cfg_.height;
      o.push_back(oob ? 1.0 : 0.0);
    }
  o.push_back(me.x / static_cast<double>(cfg_.width - 1));
  o.push_back(me.y / static_cast<double>(cfg_.height - 1));
  return o;
}

StepResult PredatorPreyEnv::step(const std::vector<int>& actions) {
  if (episode_done_) throw ContractViolation("predator_prey: step after episode end");
  if (static_cast<int>(actions.size()) != cfg_.n_agents)
    throw ContractViolation("predator_prey: wrong action count");
  for (int a : actions)
    if (a < 0 || a >= cfg_.n_actions)
      throw ContractViolation("predator_prey: action out of range");

  StepResult res;
  res.rewards.assign(cfg_.n_agents, cfg_.step_reward);

  for (int idx : env_detail::priority_permutation(cfg_.n_agents, step_rng_)) {
    Cell dest{pred_[idx].x + kActionDx[actions[idx]],
              pred_[idx].y + kActionDy[actions[idx]]};
    if (dest == pred_[idx]) continue;
    if (dest.x < 0 || dest.x >= cfg_.width || dest.y < 0 || dest.y >= cfg_.height)
      continue;
    bool bumped_prey = false;
    for (const Cell& p : prey_) bumped_prey = bumped_prey || p == dest;
    if (bumped_prey) {  // blocked, but herding pays a little
      res.rewards[idx] += cfg_.intermediary_reward;
      continue;
    }
    bool taken = false;
    for (const Cell& p : pred_) taken = taken || p == dest;
    if (!taken) pred_[idx] = dest;
  }

  // Prey drift uniformly at random, blocked by anything solid.
  for (int idx : env_detail::priority_permutation(static_cast<int>(prey_.size()),
                                                  step_rng_)) {
    int a = uniform_int(step_rng_, 0, cfg_.n_actions - 1);
    Cell dest{prey_[idx].x + kActionDx[a], prey_[idx].y + kActionDy[a]};
    if (dest == prey_[idx]) continue;
    if (dest.x < 0 || dest.x >= cfg_.width || dest.y < 0 || dest.y >= cfg_.height)
      continue;
    if (!occupied(dest)) prey_[idx] = dest;
  }

  // Capture: all four orthogonal neighbors are predators.
  std::vector<Cell> survivors;
  for (const Cell& p : prey_) {
    int guards = 0;
    for (int a = 0; a < 4; ++a) {
      Cell nb{p.x + kActionDx[a], p.y + kActionDy[a]};
      for (const Cell& q : pred_)
        if (q == nb) {
          ++guards;
          break;
        }
    }
    if (guards == 4) {
      ++captured_;
      for (int i = 0; i < cfg_.n_agents; ++i) {
        const Cell& q = pred_[i];
        if (std::abs(q.x - p.x) + std::abs(q.y - p.y) == 1)
          res.rewards[i] += cfg_.goal_reward;
      }
    } else {
      survivors.push_back(p);
    }
  }
  prey_ = std::move(survivors);

  ++steps_;
  episode_done_ = prey_.empty() || steps_ >= cfg_.step_limit;
  for (double r : res.rewards) team_return_ += r;

  for (int i = 0; i < cfg_.n_agents; ++i) res.obs.push_back(observe(i));
  res.agent_done.assign(cfg_.n_agents, episode_done_);
  res.episode_done = episode_done_;
  return res;
}

std::string PredatorPreyEnv::state_record() const {
  std::ostringstream os;
  os << "{\"predators\":[";
  for (int i = 0; i < cfg_.n_agents; ++i) {
    if (i) os << ',';
    os << "[" << pred_[i].x << ',' << pred_[i].y << "]";
  }
  os << "],\"prey\":[";
  for (size_t i = 0; i < prey_.size(); ++i) {
    if (i) os << ',';
    os << "[" << prey_[i].x << ',' << prey_[i].y << "]";
  }
  os << "],\"captured\":" << captured_ << "}";
  return os.str();
}

}  // namespace comix
