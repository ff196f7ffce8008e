#pragma once

#include <deque>
#include <vector>

#include "comix/channel.hpp"
#include "comix/rng.hpp"
#include "comix/tensor.hpp"

namespace comix {

// One stored environment step, as seen at acting time. Messages keep both
// the sender view (fresh) and the receiver view (post-channel); soft masks
// are the coordinator probabilities over each receiver's peer list in
// build order (ascending sender id).
struct StepData {
  std::vector<std::vector<double>> obs;        // n x obs_w (zeros when dead)
  std::vector<nn::Tensor> hidden_in;           // n x [1 x hidden]
  std::vector<Message> sent;                   // fresh messages, live agents
  std::vector<Message> delivered;              // post-channel mailbox view
  std::vector<std::vector<double>> soft_mask;  // n x (peer count)
  std::vector<int> actions;                    // n
  std::vector<double> rewards;                 // n
  std::vector<bool> alive;                     // n, at acting time
  std::vector<std::vector<double>> q_self;     // n x actions, acting values
  bool terminal = false;                       // episode ended after this step
};

struct EpisodeData {
  std::vector<StepData> steps;
  size_t size() const { return steps.size(); }
};

// Episode-granular ring buffer; capacity counts transitions. Segments are
// anchored at a (episode, start) pair and never span episode boundaries —
// unrolls shorter than the nominal length mask out the missing steps.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity_transitions);

  void add_episode(EpisodeData ep);
  size_t transitions() const { return total_; }
  size_t episodes() const { return eps_.size(); }
  bool ready(size_t min_transitions) const { return total_ >= min_transitions; }

  struct Anchor {
    const EpisodeData* ep = nullptr;
    int start = 0;
  };
  // Uniform over stored transitions (as segment starts / single steps).
  std::vector<Anchor> sample(int batch, Rng& rng) const;
  // Uniform over the newest `window` transitions (coordinator updates train
  // on the freshest data available).
  std::vector<Anchor> sample_recent(int batch, size_t window, Rng& rng) const;

 private:
  std::deque<EpisodeData> eps_;
  size_t cap_;
  size_t total_ = 0;
};

}  // namespace comix
