#include "comix/replay.hpp"

#include <algorithm>
#include <random>

#include "comix/errors.hpp"

namespace comix {

ReplayBuffer::ReplayBuffer(size_t capacity_transitions) : cap_(capacity_transitions) {
  if (cap_ == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::add_episode(EpisodeData ep) {
  if (ep.steps.empty()) return;
  total_ += ep.steps.size();
  eps_.push_back(std::move(ep));
  while (total_ > cap_ && eps_.size() > 1) {
    total_ -= eps_.front().steps.size();
    eps_.pop_front();
  }
}

std::vector<ReplayBuffer::Anchor> ReplayBuffer::sample(int batch, Rng& rng) const {
  return sample_recent(batch, total_, rng);
}

std::vector<ReplayBuffer::Anchor> ReplayBuffer::sample_recent(int batch, size_t window,
                                                              Rng& rng) const {
  if (total_ == 0) throw ContractViolation("sampling from empty replay buffer");
  const size_t span = std::min(window, total_);
  // Cumulative episode sizes; binary search a uniform transition index.
  std::vector<size_t> cum(eps_.size());
  size_t acc = 0;
  for (size_t i = 0; i < eps_.size(); ++i) {
    acc += eps_[i].steps.size();
    cum[i] = acc;
  }
  std::vector<Anchor> out;
  out.reserve(static_cast<size_t>(batch));
  std::uniform_int_distribution<size_t> pick(total_ - span, total_ - 1);
  for (int b = 0; b < batch; ++b) {
    const size_t idx = pick(rng);
    const size_t e = static_cast<size_t>(
        std::lower_bound(cum.begin(), cum.end(), idx + 1) - cum.begin());
    const size_t before = e == 0 ? 0 : cum[e - 1];
    out.push_back({&eps_[e], static_cast<int>(idx - before)});
  }
  return out;
}

}  // namespace comix
