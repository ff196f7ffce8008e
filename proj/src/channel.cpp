#include "comix/channel.hpp"

#include <algorithm>
#include <cmath>

#include "comix/env.hpp"
#include "comix/errors.hpp"

namespace comix {

void ChannelConfig::validate() const {
  if (usage < 0.0 || usage > 1.0) throw ConfigError("channel: usage must be in [0,1]");
  if (burst_mean < 1.0) throw ConfigError("channel: burst mean must be >= 1 step");
  if (noisy_agents < 0) throw ConfigError("channel: noisy agent count negative");
}

BroadcastChannel::BroadcastChannel(const ChannelConfig& cfg, int n_real_agents,
                                   int obs_width)
    : cfg_(cfg), n_real_(n_real_agents), obs_width_(obs_width) {
  cfg_.validate();
  const double u = cfg_.usage;
  if (u > 0.0 && u < 1.0) {
    // ON bursts sized so ON/(ON+OFF) hits the usage fraction; when the
    // geometric support floor (length 1) overshoots, thin deliveries iid.
    on_mean_ = std::max(1.0, cfg_.burst_mean * u / (1.0 - u));
    const double base = on_mean_ / (on_mean_ + cfg_.burst_mean);
    thin_q_ = std::min(1.0, u / base);
  }
  reset(0);
}

void BroadcastChannel::reset(uint64_t episode_seed) {
  rng_ = make_rng(cfg_.seed ^ (episode_seed * 0x9E3779B97F4A7C15ULL), "channel");
  step_ = 0;
  senders_.clear();
}

int BroadcastChannel::draw_run(double mean) {
  // Length >= 1 with the requested mean.
  std::geometric_distribution<int> tail(1.0 / mean);
  return 1 + tail(rng_);
}

bool BroadcastChannel::advance_gate(SenderState& s) {
  if (cfg_.usage >= 1.0) return true;
  if (cfg_.usage <= 0.0) return false;
  if (s.run_left == 0) {
    s.on = !s.on;
    s.run_left = draw_run(s.on ? on_mean_ : cfg_.burst_mean);
  }
  --s.run_left;
  if (!s.on) return false;
  return thin_q_ >= 1.0 || uniform(rng_, 0.0, 1.0) < thin_q_;
}

Message BroadcastChannel::deliver(int sender, const Message& fresh) {
  auto [it, inserted] = senders_.try_emplace(sender);
  SenderState& st = it->second;
  bool ok;
  if (inserted) {
    // First message from this sender each episode always lands so every
    // mailbox is initialized; chain starts near its stationary state.
    ok = true;
    if (cfg_.usage > 0.0 && cfg_.usage < 1.0) {
      const double base = on_mean_ / (on_mean_ + cfg_.burst_mean);
      st.on = uniform(rng_, 0.0, 1.0) < base;
      st.run_left = draw_run(st.on ? on_mean_ : cfg_.burst_mean);
    }
  } else {
    ok = advance_gate(st);
  }
  Message out;
  if (ok) {
    out = fresh;
    out.age = 0;
    st.mail = out;
    st.has_mail = true;
  } else {
    st.mail.age += 1;
    out = st.mail;
  }
  if (logging_) events_.push_back({step_, sender, ok, out.age});
  return out;
}

std::vector<Message> BroadcastChannel::broadcast(const std::vector<Message>& sent) {
  std::vector<Message> in = sent;
  if (cfg_.noisy_agents > 0) {
    auto noise = noisy_messages(cfg_.noisy_agents, obs_width_, n_real_, rng_);
    in.insert(in.end(), noise.begin(), noise.end());
  }
  std::sort(in.begin(), in.end(),
            [](const Message& a, const Message& b) { return a.sender < b.sender; });
  std::vector<Message> out;
  out.reserve(in.size());
  for (const Message& m : in) out.push_back(deliver(m.sender, m));
  ++step_;
  return out;
}

std::vector<Message> noisy_messages(int count, int obs_width, int first_sender_id,
                                    Rng& rng) {
  std::vector<Message> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Message m;
    m.sender = first_sender_id + i;
    m.obs.resize(obs_width);
    for (double& x : m.obs) x = uniform_int(rng, 0, 1);
    m.action = uniform_int(rng, 0, kNumActions - 1);
    m.age = 0;
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace comix
