#include <sstream>

#include "comix/envs.hpp"
#include "comix/errors.hpp"

namespace comix {

SwitchEnv::SwitchEnv(const EnvConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.n_agents != 4)
    throw ConfigError("switch: exactly 4 corner agents supported");
  if (cfg_.width < 3 || cfg_.height < 2)
    throw ConfigError("switch: map too small for a corridor");
  reset(0);
}

bool SwitchEnv::passable(Cell c) const {
  if (c.x < 0 || c.x >= cfg_.width || c.y < 0 || c.y >= cfg_.height) return false;
  // Two open rooms (two columns each) flank a central wall; the single-file
  // corridor crosses it at corridor_row_.
  if (c.x >= 2 && c.x <= cfg_.width - 3) return c.y == corridor_row_;
  return true;
}

std::vector<std::vector<double>> SwitchEnv::reset(uint64_t seed) {
  Rng layout = make_rng(seed, "switch.layout");
  step_rng_ = make_rng(seed, "switch.step");
  corridor_row_ = uniform_int(layout, 0, cfg_.height - 1);
  const int R = cfg_.width - 1, B = cfg_.height - 1;
  pos_ = {{0, 0}, {0, B}, {R, 0}, {R, B}};
  target_.clear();
  for (const Cell& p : pos_) target_.push_back({R - p.x, p.y});
  done_.assign(cfg_.n_agents, false);
  steps_ = 0;
  episode_done_ = false;
  team_return_ = 0.0;
  std::vector<std::vector<double>> obs;
  for (int i = 0; i < cfg_.n_agents; ++i) obs.push_back(observe(i));
  return obs;
}

std::vector<double> SwitchEnv::observe(int i) const {
  if (done_[i]) return std::vector<double>(cfg_.obs_width, 0.0);
  const double W = cfg_.width - 1, H = cfg_.height - 1;
  return {pos_[i].x / W, pos_[i].y / H, (target_[i].x - pos_[i].x) / W,
          (target_[i].y - pos_[i].y) / H};
}

StepResult SwitchEnv::step(const std::vector<int>& actions) {
  if (episode_done_) throw ContractViolation("switch: step after episode end");
  if (static_cast<int>(actions.size()) != cfg_.n_agents)
    throw ContractViolation("switch: wrong action count");
  for (int a : actions)
    if (a < 0 || a >= cfg_.n_actions) throw ContractViolation("switch: action out of range");

  StepResult res;
  res.rewards.assign(cfg_.n_agents, cfg_.step_reward);
  for (int idx : env_detail::priority_permutation(cfg_.n_agents, step_rng_)) {
    if (done_[idx]) continue;
    Cell dest{pos_[idx].x + kActionDx[actions[idx]], pos_[idx].y + kActionDy[actions[idx]]};
    if (!passable(dest)) continue;
    bool taken = false;
    for (int j = 0; j < cfg_.n_agents; ++j)
      if (j != idx && !done_[j] && pos_[j] == dest) taken = true;
    if (!taken) pos_[idx] = dest;
  }
  for (int i = 0; i < cfg_.n_agents; ++i) {
    if (!done_[i] && pos_[i] == target_[i]) {
      res.rewards[i] += cfg_.goal_reward;
      done_[i] = true;  // done agents leave the grid
    }
  }
  ++steps_;
  bool all_done = true;
  for (bool d : done_) all_done &= d;
  episode_done_ = all_done || steps_ >= cfg_.step_limit;
  for (double r : res.rewards) team_return_ += r;

  for (int i = 0; i < cfg_.n_agents; ++i) res.obs.push_back(observe(i));
  res.agent_done.assign(done_.begin(), done_.end());
  res.episode_done = episode_done_;
  return res;
}

double SwitchEnv::headline_metric() const {
  return team_return_ / (cfg_.n_agents * cfg_.goal_reward);
}

std::string SwitchEnv::state_record() const {
  std::ostringstream os;
  os << "{\"corridor_row\":" << corridor_row_ << ",\"agents\":[";
  for (int i = 0; i < cfg_.n_agents; ++i) {
    if (i) os << ',';
    os << "[" << pos_[i].x << ',' << pos_[i].y << ',' << (done_[i] ? 1 : 0) << "]";
  }
  os << "]}";
  return os.str();
}

}  // namespace comix
