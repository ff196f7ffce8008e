#include <algorithm>
#include <cstdlib>
#include <deque>
#include <iostream>
#include <sstream>

#include "comix/envs.hpp"
#include "comix/errors.hpp"

namespace comix {

namespace {
int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }
// Load starting distance to goal; Fig-2-style layouts place every load 15
// steps out (shrunk only if the map cannot realize it).
constexpr int kStartGoalDist = 15;
}  // namespace

TransportEnv::TransportEnv(const EnvConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  n_loads_ = cfg_.n_entities;
  reset(0);
}

Cell TransportEnv::carrier_pos(int agent) const {
  const Cell& l = load_[agent / 2];
  return agent % 2 == 0 ? Cell{l.x, l.y - 1} : Cell{l.x, l.y + 1};
}

bool TransportEnv::trio_cells_free(int k, Cell load_dest, bool ignore_self) const {
  for (int dy = -1; dy <= 1; ++dy) {
    Cell c{load_dest.x, load_dest.y + dy};
    if (c.x < 0 || c.x >= cfg_.width || c.y < 0 || c.y >= cfg_.height) return false;
    if (obstacles_.count(c)) return false;
    for (int j = 0; j < n_loads_; ++j) {
      if (delivered_[j]) continue;
      if (ignore_self && j == k) continue;
      if (std::abs(c.x - load_[j].x) == 0 && std::abs(c.y - load_[j].y) <= 1) return false;
    }
  }
  return true;
}

bool TransportEnv::rigid_path_exists(Cell from, Cell to) const {
  auto valid = [&](Cell c) {
    for (int dy = -1; dy <= 1; ++dy) {
      Cell p{c.x, c.y + dy};
      if (p.x < 0 || p.x >= cfg_.width || p.y < 0 || p.y >= cfg_.height) return false;
      if (obstacles_.count(p)) return false;
    }
    return true;
  };
  if (!valid(from) || !valid(to)) return false;
  std::vector<char> seen(static_cast<size_t>(cfg_.width) * cfg_.height, 0);
  auto idx = [&](Cell c) { return static_cast<size_t>(c.y) * cfg_.width + c.x; };
  std::deque<Cell> queue{from};
  seen[idx(from)] = 1;
  while (!queue.empty()) {
    Cell c = queue.front();
    queue.pop_front();
    if (c == to) return true;
    for (int a = 0; a < 4; ++a) {
      Cell nxt{c.x + kActionDx[a], c.y + kActionDy[a]};
      if (nxt.x < 0 || nxt.x >= cfg_.width || nxt.y < 0 || nxt.y >= cfg_.height) continue;
      if (seen[idx(nxt)] || !valid(nxt)) continue;
      seen[idx(nxt)] = 1;
      queue.push_back(nxt);
    }
  }
  return false;
}

void TransportEnv::sample_layout(uint64_t seed) {
  goal_ = {cfg_.width - 2, cfg_.height / 2};
  int warned = 0;
  for (uint64_t attempt = 0;; ++attempt) {
    if (attempt == 1000)
      throw ConfigError("transport: layout unsatisfiable after reseeding");
    // Every 100 failures, reseed the sampler stream and report once.
    Rng layout = make_rng(seed + (attempt / 100) * 0x9e3779b9ULL, "transport.layout");
    for (uint64_t burn = 0; burn < attempt % 100; ++burn) layout();
    if (attempt > 0 && attempt % 100 == 0 && !warned++)
      std::cerr << "transport: resampling layout (seed " << seed << ")\n";

    // Candidate load cells at the target distance, with flank rows in-bounds;
    // relax the distance only if the map cannot realize it.
    std::vector<Cell> candidates;
    for (int dist = kStartGoalDist; dist >= 1 && candidates.empty(); --dist)
      for (int y = 1; y < cfg_.height - 1; ++y)
        for (int x = 0; x < cfg_.width; ++x)
          if (manhattan({x, y}, goal_) == dist) candidates.push_back({x, y});
    std::shuffle(candidates.begin(), candidates.end(), layout);

    // Spread pairs across axis sectors relative to the goal (dominant
    // displacement direction), mirroring the "positioned along four axes"
    // layout; fall back to any free candidate when a sector is empty.
    auto sector = [&](Cell c) {
      int dx = c.x - goal_.x, dy = c.y - goal_.y;
      if (std::abs(dx) >= std::abs(dy)) return dx <= 0 ? 0 : 1;
      return dy < 0 ? 2 : 3;
    };
    load_.clear();
    auto overlaps_existing = [&](Cell c) {
      for (const Cell& l : load_)
        if (std::abs(c.x - l.x) <= 1 && std::abs(c.y - l.y) <= 2) return true;
      return false;
    };
    std::vector<int> sector_order = env_detail::priority_permutation(4, layout);
    for (int k = 0; k < n_loads_ && static_cast<int>(load_.size()) == k; ++k) {
      int want = sector_order[k % 4];
      for (const Cell& c : candidates)
        if (sector(c) == want && !overlaps_existing(c)) {
          load_.push_back(c);
          break;
        }
      if (static_cast<int>(load_.size()) == k)  // sector empty; take anything
        for (const Cell& c : candidates)
          if (!overlaps_existing(c)) {
            load_.push_back(c);
            break;
          }
    }
    if (static_cast<int>(load_.size()) != n_loads_) continue;

    // Obstacles avoid trios and the goal's flank column.
    std::set<Cell> blocked;
    for (const Cell& l : load_)
      for (int dy = -1; dy <= 1; ++dy) blocked.insert({l.x, l.y + dy});
    for (int dy = -1; dy <= 1; ++dy) blocked.insert({goal_.x, goal_.y + dy});
    std::vector<Cell> free_cells;
    for (int y = 0; y < cfg_.height; ++y)
      for (int x = 0; x < cfg_.width; ++x)
        if (!blocked.count({x, y})) free_cells.push_back({x, y});
    std::shuffle(free_cells.begin(), free_cells.end(), layout);
    const int n_obst =
        static_cast<int>(cfg_.obstacle_fraction * cfg_.width * cfg_.height);
    if (static_cast<int>(free_cells.size()) < n_obst) continue;
    obstacles_ = std::set<Cell>(free_cells.begin(), free_cells.begin() + n_obst);

    bool ok = true;
    for (const Cell& l : load_) ok = ok && rigid_path_exists(l, goal_);
    if (ok) return;
  }
}

std::vector<std::vector<double>> TransportEnv::reset(uint64_t seed) {
  step_rng_ = make_rng(seed, "transport.step");
  sample_layout(seed);
  delivered_.assign(n_loads_, false);
  min_goal_dist_.clear();
  for (const Cell& l : load_) min_goal_dist_.push_back(manhattan(l, goal_));
  steps_ = 0;
  episode_done_ = false;
  team_return_ = 0.0;
  std::vector<std::vector<double>> obs;
  for (int i = 0; i < cfg_.n_agents; ++i) obs.push_back(observe(i));
  return obs;
}

void TransportEnv::set_layout_for_test(const std::vector<Cell>& loads, Cell goal,
                                       const std::set<Cell>& obstacles) {
  if (static_cast<int>(loads.size()) != n_loads_)
    throw ContractViolation("transport test layout: load count mismatch");
  load_ = loads;
  goal_ = goal;
  obstacles_ = obstacles;
  delivered_.assign(n_loads_, false);
  min_goal_dist_.clear();
  for (const Cell& l : load_) min_goal_dist_.push_back(manhattan(l, goal_));
  steps_ = 0;
  episode_done_ = false;
  team_return_ = 0.0;
}

std::vector<double> TransportEnv::observe(int agent) const {
  if (!agent_alive(agent)) return std::vector<double>(cfg_.obs_width, 0.0);
  const int k = agent / 2;
  const Cell me = carrier_pos(agent);
  const double W = cfg_.width - 1, H = cfg_.height - 1;
  std::vector<double> o;
  o.reserve(cfg_.obs_width);
  o.push_back(me.x / W);
  o.push_back(me.y / H);
  o.push_back((load_[k].x - me.x) / W);
  o.push_back((load_[k].y - me.y) / H);
  o.push_back((goal_.x - me.x) / W);
  o.push_back((goal_.y - me.y) / H);
  // 5x5 obstacle/out-of-bounds window around the carrier, center omitted.
  for (int dy = -2; dy <= 2; ++dy)
    for (int dx = -2; dx <= 2; ++dx) {
      if (dx == 0 && dy == 0) continue;
      Cell c{me.x + dx, me.y + dy};
      bool solid = c.x < 0 || c.x >= cfg_.width || c.y < 0 || c.y >= cfg_.height ||
                   obstacles_.count(c) != 0;
      o.push_back(solid ? 1.0 : 0.0);
    }
  return o;
}

StepResult TransportEnv::step(const std::vector<int>& actions) {
  if (episode_done_) throw ContractViolation("transport: step after episode end");
  if (static_cast<int>(actions.size()) != cfg_.n_agents)
    throw ContractViolation("transport: wrong action count");
  for (int a : actions)
    if (a < 0 || a >= cfg_.n_actions) throw ContractViolation("transport: action out of range");

  StepResult res;
  res.rewards.assign(cfg_.n_agents, cfg_.step_reward);
  for (int k : env_detail::priority_permutation(n_loads_, step_rng_)) {
    if (delivered_[k]) continue;
    const int a0 = actions[2 * k], a1 = actions[2 * k + 1];
    if (a0 != a1 || a0 == 4) continue;  // moves only on a shared direction
    Cell dest{load_[k].x + kActionDx[a0], load_[k].y + kActionDy[a0]};
    if (!trio_cells_free(k, dest, true)) continue;
    load_[k] = dest;
    const int dist = manhattan(load_[k], goal_);
    if (dist < min_goal_dist_[k]) {
      min_goal_dist_[k] = dist;
      res.rewards[2 * k] += cfg_.intermediary_reward;
      res.rewards[2 * k + 1] += cfg_.intermediary_reward;
    }
    if (load_[k] == goal_) {
      delivered_[k] = true;
      res.rewards[2 * k] += cfg_.goal_reward;
      res.rewards[2 * k + 1] += cfg_.goal_reward;
    }
  }
  ++steps_;
  bool all = true;
  for (bool d : delivered_) all &= d;
  episode_done_ = all || steps_ >= cfg_.step_limit;
  for (double r : res.rewards) team_return_ += r;

  for (int i = 0; i < cfg_.n_agents; ++i) res.obs.push_back(observe(i));
  res.agent_done.clear();
  for (int i = 0; i < cfg_.n_agents; ++i) res.agent_done.push_back(!agent_alive(i));
  res.episode_done = episode_done_;
  return res;
}

double TransportEnv::headline_metric() const {
  int done = 0;
  for (bool d : delivered_) done += d ? 1 : 0;
  return 100.0 * done / n_loads_;
}

std::string TransportEnv::state_record() const {
  std::ostringstream os;
  os << "{\"goal\":[" << goal_.x << ',' << goal_.y << "],\"loads\":[";
  for (int k = 0; k < n_loads_; ++k) {
    if (k) os << ',';
    os << "[" << load_[k].x << ',' << load_[k].y << ',' << (delivered_[k] ? 1 : 0) << "]";
  }
  os << "]}";
  return os.str();
}

}  // namespace comix
