#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "comix/rng.hpp"

namespace comix {

// Intention broadcast: the sender's observation plus the action it would
// take, with an age counter (0 = fresh, k = delivered k steps ago).
struct Message {
  int sender = 0;
  std::vector<double> obs;
  int action = 4;
  int age = 0;
};

struct ChannelConfig {
  double usage = 1.0;       // long-run delivered fraction per sender
  double burst_mean = 4.0;  // mean outage run length in steps
  int noisy_agents = 0;
  bool delay_scaling = false;  // consumed by the fine-tune forward pass
  uint64_t seed = 0;
  void validate() const;
};

// Feature attenuation for stale messages, applied after the message
// encoder when delay scaling is enabled.
inline double delay_scale_factor(int age) { return 1.0 / (1.0 + age); }

// Lossy broadcast medium. Each sender runs an independent two-state run-
// length process (geometric ON/OFF bursts thinned to the target usage);
// on a drop, the sender's last delivered message is substituted with its
// age. The first step after reset always delivers, so every mailbox is
// initialized; at usage 0 that first message is all receivers ever see.
class BroadcastChannel {
 public:
  BroadcastChannel(const ChannelConfig& cfg, int n_real_agents, int obs_width);

  void reset(uint64_t episode_seed);
  // One step: `sent` holds fresh messages from live real senders. Returns
  // one message per present sender plus one per noisy agent (fresh or
  // stale). Output is ordered by sender id.
  std::vector<Message> broadcast(const std::vector<Message>& sent);

  struct Event {
    int step = 0;
    int sender = 0;
    bool delivered = false;
    int age = 0;
  };
  void set_logging(bool on) { logging_ = on; }
  const std::vector<Event>& events() const { return events_; }
  void clear_events() { events_.clear(); }

  int n_real_agents() const { return n_real_; }
  int noisy_count() const { return cfg_.noisy_agents; }
  const ChannelConfig& config() const { return cfg_; }

 private:
  struct SenderState {
    bool on = true;
    int run_left = 0;
    bool has_mail = false;
    Message mail;
  };
  bool advance_gate(SenderState& s);
  Message deliver(int sender, const Message& fresh);
  int draw_run(double mean);

  ChannelConfig cfg_;
  int n_real_;
  int obs_width_;
  double on_mean_ = 1.0;
  double thin_q_ = 1.0;
  Rng rng_;
  int step_ = 0;
  std::map<int, SenderState> senders_;
  bool logging_ = false;
  std::vector<Event> events_;
};

// Uniform random bit payloads from synthetic senders with ids above the
// real-agent range.
std::vector<Message> noisy_messages(int count, int obs_width, int first_sender_id,
                                    Rng& rng);

}  // namespace comix
