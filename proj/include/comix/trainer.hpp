#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "comix/channel.hpp"
#include "comix/checkpoint.hpp"
#include "comix/env.hpp"
#include "comix/model.hpp"
#include "comix/optim.hpp"
#include "comix/replay.hpp"

namespace comix {

struct TrainConfig {
  double gamma = 0.99;
  int batch_size = 512;
  int recurrent_steps = 2;
  int q_update_interval = 50;       // env steps
  int coord_update_interval = 50;   // env steps
  int target_update_interval = 20000;  // env steps
  int target_update_episodes = 0;      // >0: sync per episodes instead of steps
  double q_lr = 1e-4;
  double coord_lr = 5e-5;
  double weight_decay = 1e-5;
  double beta1 = 0.9;      // kept for config parity; this RMSprop has no momentum
  double smoothing = 0.99; // squared-gradient accumulator smoothing
  int min_buffer = 1000;   // warm-up transitions before updates
  int max_buffer = 20000;
  int episodes = 2500;     // episode budget
  double eps_start = 1.0;
  double eps_final = 0.05;
  double eps_anneal_fraction = 0.5;  // of the episode budget
  uint64_t seed = 0;
  bool comm_enabled = true;
  bool finetune = false;   // freeze coordinator, scale stale features
  int coord_fresh_window = 2048;  // coordinator batches sample this many newest transitions

  static TrainConfig defaults_for(EnvKind k);
  void validate() const;
};

struct EpisodeStats {
  int episode = 0;
  uint64_t env_steps = 0;
  std::vector<double> agent_returns;
  double team_return = 0.0;
  double headline = 0.0;
  double epsilon = 0.0;
  double td_loss = std::nan("");
  double coord_loss = std::nan("");
  double accepted_fraction = std::nan("");
  int steps = 0;
};

struct MaskTraceRecord {
  int episode = 0, step = 0, agent = 0;
  std::vector<int> senders;
  std::vector<double> probs;
  std::vector<int> bits;
};

// ---- TD machinery (exposed for tests) ----

// One (agent, step) message-aggregation fold across the batch.
struct MsgFold {
  nn::Tensor rows;              // [M x msg_w] accepted message features
  std::vector<double> factors;  // per-row attenuation (1 when scaling off)
  nn::Tensor select;            // [B x M] row-stochastic mean weights
  bool empty = true;
};

struct TdBatch {
  int B = 0, T = 0;
  std::vector<nn::Tensor> h0;                   // [agent] B x hidden
  std::vector<std::vector<nn::Tensor>> obs;     // [agent][t] B x obsw, t in 0..T
  std::vector<std::vector<nn::Tensor>> act1h;   // [agent][t] B x A, zero row = masked
  std::vector<std::vector<MsgFold>> msgs;       // [agent][t], t in 0..T
  std::vector<nn::Tensor> state;                // [t] B x S
  std::vector<std::vector<double>> r_team;      // [t][b], t < T
  std::vector<std::vector<char>> terminal;      // [t][b]
  std::vector<std::vector<char>> valid;         // [t][b], loss steps
  std::vector<std::vector<char>> alive;         // [t][b*n + agent], acting-time liveness
  std::vector<std::vector<nn::Tensor>> q_self_stored;  // [agent][t] B x A
};

TdBatch build_td_batch(const ModelConfig& mc,
                       const std::vector<ReplayBuffer::Anchor>& anchors, int T,
                       bool delay_scaling);

struct UnrollOut {
  std::vector<std::vector<nn::Value>> q_comb;  // [agent][t]
  std::vector<std::vector<nn::Value>> q_self;  // [agent][t]
};
// Rebuilds hidden states from the stored segment-initial hidden and computes
// Q values for steps t in [t_begin, t_end). The recurrent advance always
// starts at step 0 so later steps see the exact acting-time context.
UnrollOut unroll_q(nn::Graph& g, ComixModel& m, const TdBatch& batch,
                   int t_begin, int t_end);

struct TdTargets {
  nn::Tensor y;  // [T*B x 1], t-major
  nn::Tensor w;  // [T*B x 1] validity weights
  double sum_w = 0.0;
};
// Double-Q targets: online net picks argmax actions at t+1, target net
// evaluates them, target mixer conditions on s'. Terminal steps use y = r.
TdTargets compute_td_targets(ComixModel& online, ComixModel& target,
                             const TdBatch& batch, double gamma);
// Weighted mean absolute error |y - Q_TOT| over valid (b, t). Targets are
// constants: gradients flow only through the online unroll and mixer.
nn::Value td_loss(nn::Graph& g, ComixModel& online, const TdBatch& batch,
                  const TdTargets& tg);

// ---- Contrastive machinery (exposed for tests) ----

// Frozen per-transition data for one coordinator update: pair sequences
// bucketed by (receiver, peer count) plus the stop-gradient coefficients
// w_i * clip(maxQ(complement) - maxQ(accepted), 0). sign/offset rebuild the
// per-peer decision confidence from the accept probability: conf = p for an
// accepted peer, 1-p for a rejected one, so a positive coefficient pushes
// every decision toward the complementary mask.
struct CoordPrep {
  struct Bucket {
    int agent = 0;
    int len = 0;
    std::vector<nn::Tensor> seq;  // [len] tensors [Bg x 2*msg_w]
    std::vector<double> coeff;    // [Bg]
    nn::Tensor sign;              // [Bg x len], +1 accepted / -1 rejected
    nn::Tensor offset;            // [Bg x len], 0 accepted / 1 rejected
  };
  std::vector<Bucket> buckets;
  int batch_size = 1;  // loss normalizer
  double mean_gap = 0.0;
  int active = 0;  // (transition, receiver) pairs with a positive gap
};
CoordPrep prepare_coord_batch(ComixModel& m, const ModelConfig& mc,
                              const std::vector<const StepData*>& steps,
                              bool delay_scaling);
// Sum over buckets of coefficient-weighted decision confidences; the
// coefficients are constants, so gradients reach coordinator parameters only.
nn::Value coord_loss(nn::Graph& g, ComixModel& m, const CoordPrep& prep);

// ---- Evaluation ----

struct EvalOptions {
  int episodes = 100;
  uint64_t seed = 12345;
  ChannelConfig channel;
  bool comm = true;
  bool delay_scaling = false;
  bool collect_traces = false;
  bool log_channel_events = false;
};

struct EvalResult {
  std::vector<double> headline;
  std::vector<double> team_return;
  double mean_headline = 0.0, std_headline = 0.0;
  double mean_team_return = 0.0;
  double mean_accepted_fraction = std::nan("");
  std::vector<MaskTraceRecord> traces;
  std::vector<BroadcastChannel::Event> channel_events;
};

// ---- Trainer ----

class Trainer {
 public:
  Trainer(const EnvConfig& ec, const TrainConfig& tc, const ChannelConfig& cc);

  // Runs episodes up to the budget. The callback (nullable) receives stats
  // after each episode and may return false to stop early.
  void train(const std::function<bool(const EpisodeStats&)>& cb = nullptr);
  EvalResult evaluate(const EvalOptions& opts);

  double td_update();
  double coord_update();
  void sync_target();

  CheckpointData make_checkpoint() const;
  // Restores parameters, optimizer state and counters from a checkpoint;
  // episode/env-step counters restart (fresh training phase).
  void load(const CheckpointData& data);

  ComixModel& model() { return online_; }
  ComixModel& target_model() { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  nn::RmsProp& q_optimizer() { return q_opt_; }
  nn::RmsProp& c_optimizer() { return c_opt_; }
  const EnvConfig& env_config() const { return ecfg_; }
  const TrainConfig& train_config() const { return tcfg_; }
  const ChannelConfig& channel_config() const { return ccfg_; }
  const ModelConfig& model_config() const { return mcfg_; }
  uint64_t env_steps() const { return env_steps_; }
  int episodes_done() const { return episode_; }
  double epsilon_at(int episode) const;
  void set_config_hash(std::string h) { config_hash_ = std::move(h); }

  struct RolloutOptions {
    double epsilon = 0.0;
    bool comm = true;
    bool delay_scaling = false;
    bool record = false;
    bool collect_traces = false;
    int episode_index = 0;
    std::function<void()> on_step;  // runs after each env step
  };
  struct RolloutResult {
    EpisodeData data;
    std::vector<double> agent_returns;
    double team_return = 0.0;
    double headline = 0.0;
    int steps = 0;
    double accepted_fraction = std::nan("");
    std::vector<MaskTraceRecord> traces;
  };
  RolloutResult rollout(Env& env, BroadcastChannel& ch, Rng& act_rng,
                        uint64_t ep_seed, const RolloutOptions& opts);

 private:
  EnvConfig ecfg_;
  TrainConfig tcfg_;
  ChannelConfig ccfg_;
  ModelConfig mcfg_;
  ComixModel online_;
  ComixModel target_;
  nn::RmsProp q_opt_;
  nn::RmsProp c_opt_;
  ReplayBuffer buffer_;
  std::unique_ptr<Env> env_;
  BroadcastChannel channel_;
  Rng explore_rng_;
  Rng sample_q_rng_;
  Rng sample_c_rng_;
  uint64_t env_steps_ = 0;
  int episode_ = 0;
  double last_td_ = std::nan("");
  double last_lc_ = std::nan("");
  std::string config_hash_;
};

}  // namespace comix
