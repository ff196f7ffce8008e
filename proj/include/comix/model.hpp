#pragma once

#include <cstdint>
#include <vector>

#include "comix/channel.hpp"
#include "comix/modules.hpp"

namespace comix {

struct ModelConfig {
  int obs_width = 4;
  int n_agents = 4;
  int n_actions = 5;
  int hidden = 128;       // GRU / MLP width everywhere
  int mixer_h1 = 32;
  int mixer_h2 = 16;
  // Complementary-mask Q forward for the contrastive loss: hardened by
  // default, soft probabilities behind this flag.
  bool soft_complement = false;
  int msg_width() const { return obs_width + n_actions; }
  int state_width() const { return obs_width * n_agents; }
};

// The full agent system: shared feature extractor, per-agent recurrent Q
// nets with message-conditioned weighting, per-agent coordinators, and the
// monotone mixer. Q-side parameters live in q_params, coordinator
// parameters in c_params (separate optimizers and learning rates).
class ComixModel {
 public:
  ComixModel(const ModelConfig& cfg, uint64_t seed);

  struct AgentNet {
    nn::GRUCell gru;
    nn::LayerNormCol ln;
    nn::Linear q_head;
    nn::MLP2 msg_enc;
    nn::MLP2 weight_head;
    // Coordinator stack
    nn::GRUCell co_fwd, co_bwd;
    nn::LayerNormCol co_ln;
    nn::MLP2 co_mlp;
  };

  ModelConfig cfg;
  nn::MLP2 fe;
  std::vector<AgentNet> agents;
  nn::Linear mix_w1, mix_b1, mix_w2, mix_b2, mix_w3, mix_b3;  // hypernets

  nn::ParamStore q_params;
  nn::ParamStore c_params;

  void copy_values_from(const ComixModel& src);
  nn::Tensor zero_hidden() const { return nn::Tensor::zeros(1, cfg.hidden); }
};

namespace policy {

// Observation -> features -> agent GRU. h_next feeds the next step and the
// weight head; q_self reads the layer-normed state through the linear head.
struct CoreOut {
  nn::Value q_self;  // [B x actions]
  nn::Value h_next;  // [B x hidden]
};
CoreOut core_forward(nn::Graph& g, ComixModel& m, int agent, nn::Value obs,
                     nn::Value h_prev);

// Argmax with lowest-index tie-breaking.
int argmax_row(const nn::Tensor& t, int row);

// Flattens a message to encoder input: observation then one-hot action.
std::vector<double> message_row(const Message& msg, int n_actions);

// Encoder over stacked message rows [M x msg_w]; delay_scale holds the
// per-row attenuation factors (all 1 when delay scaling is off).
nn::Value encode_messages(nn::Graph& g, ComixModel& m, int agent,
                          const nn::Tensor& rows,
                          const std::vector<double>& delay_scale);

// Averages encodings into per-receiver rows: select is a constant [B x M]
// row-stochastic matrix (accepted-message weights); zero rows stay zero.
nn::Value aggregate_messages(nn::Graph& g, nn::Value encodings,
                             const nn::Tensor& select);

// (h', averaged encoding) -> bounded per-action weights in (0,1).
nn::Value coord_weights(nn::Graph& g, ComixModel& m, int agent, nn::Value h,
                        nn::Value avg_enc);

inline nn::Value q_combined(nn::Graph& g, nn::Value q_self, nn::Value w) {
  return g.mul(q_self, w);
}

int act_epsilon_greedy(const nn::Tensor& q_row, double epsilon, Rng& rng);

}  // namespace policy

namespace coord {

// Pair sequence z for one receiver: row j is concat(own message, peer j's
// message); peers ascend by sender id, self excluded.
struct PairSeq {
  nn::Tensor rows;           // [P x 2*msg_w]
  std::vector<int> senders;  // aligned with rows
};
PairSeq build_pairs(const Message& own, const std::vector<Message>& delivered,
                    int n_actions);

// Folded coordinator forward: seq[t] is [B x 2*msg_w] (same sequence length
// across the fold); returns accept probabilities [B x L] via the two-way
// softmax over the per-position logits.
nn::Value coordinate_folded(nn::Graph& g, ComixModel& m, int agent,
                            const std::vector<nn::Value>& seq);

// Convenience single-receiver path; empty pairs produce an empty tensor.
nn::Tensor coordinate_probs(ComixModel& m, int agent, const PairSeq& pairs);

inline bool accept_bit(double p) { return p >= 0.5; }

}  // namespace coord

namespace mixer {

// Monotone mixing of per-agent chosen Q-values under hypernetwork weights
// conditioned on the joint state (|.| keeps every generated weight
// non-negative). q is [B x n], state [B x S]; result [B x 1].
nn::Value mix(nn::Graph& g, ComixModel& m, nn::Value q, nn::Value state);

// Per-agent mean of the first generated weight matrix's rows: w_i used by
// the contrastive loss. Returns [B x n].
nn::Tensor agent_weights(ComixModel& m, const nn::Tensor& state);

}  // namespace mixer

}  // namespace comix
