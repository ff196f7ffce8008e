#include <algorithm>

#include "comix/errors.hpp"
#include "comix/model.hpp"

namespace comix::coord {

PairSeq build_pairs(const Message& own, const std::vector<Message>& delivered,
                    int n_actions) {
  std::vector<const Message*> peers;
  for (const Message& msg : delivered)
    if (msg.sender != own.sender) peers.push_back(&msg);
  std::sort(peers.begin(), peers.end(),
            [](const Message* a, const Message* b) { return a->sender < b->sender; });

  PairSeq seq;
  if (peers.empty()) return seq;
  const std::vector<double> own_row = policy::message_row(own, n_actions);
  const int mw = static_cast<int>(own_row.size());
  seq.rows = nn::Tensor::zeros(static_cast<int>(peers.size()), 2 * mw);
  for (size_t p = 0; p < peers.size(); ++p) {
    const std::vector<double> peer_row = policy::message_row(*peers[p], n_actions);
    if (static_cast<int>(peer_row.size()) != mw)
      throw ContractViolation("build_pairs: inconsistent message widths");
    for (int c = 0; c < mw; ++c) {
      seq.rows.at(static_cast<int>(p), c) = own_row[c];
      seq.rows.at(static_cast<int>(p), mw + c) = peer_row[c];
    }
    seq.senders.push_back(peers[p]->sender);
  }
  return seq;
}

nn::Value coordinate_folded(nn::Graph& g, ComixModel& m, int agent,
                            const std::vector<nn::Value>& seq) {
  if (seq.empty()) throw ContractViolation("coordinate_folded: empty sequence");
  ComixModel::AgentNet& a = m.agents[agent];
  std::vector<nn::Value> per_pos =
      nn::bigru_forward(g, a.co_fwd, a.co_bwd, seq);
  std::vector<nn::Value> probs;
  probs.reserve(per_pos.size());
  for (nn::Value& h : per_pos) {
    nn::Value logits = a.co_mlp.forward(g, a.co_ln.forward(g, h));  // [B x 2]
    // Two-way softmax: accept probability = sigmoid(l_accept - l_reject),
    // so accept + reject sums to one exactly.
    nn::Value diff = g.sub(g.slice_cols(logits, 1, 1), g.slice_cols(logits, 0, 1));
    probs.push_back(g.sigmoid(diff));
  }
  return g.concat_cols(probs);  // [B x L]
}

nn::Tensor coordinate_probs(ComixModel& m, int agent, const PairSeq& pairs) {
  if (pairs.senders.empty()) return nn::Tensor{};
  nn::Graph g;
  std::vector<nn::Value> seq;
  for (int p = 0; p < pairs.rows.rows(); ++p) {
    nn::Tensor row = nn::Tensor::zeros(1, pairs.rows.cols());
    for (int c = 0; c < pairs.rows.cols(); ++c) row.at(0, c) = pairs.rows.at(p, c);
    seq.push_back(g.constant(std::move(row)));
  }
  return coordinate_folded(g, m, agent, seq).val();
}

}  // namespace comix::coord
