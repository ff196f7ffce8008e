#include "comix/errors.hpp"
#include "comix/model.hpp"

namespace comix::policy {

CoreOut core_forward(nn::Graph& g, ComixModel& m, int agent, nn::Value obs,
                     nn::Value h_prev) {
  if (obs.cols() != m.cfg.obs_width)
    throw ContractViolation("core_forward: observation width mismatch");
  ComixModel::AgentNet& a = m.agents[agent];
  nn::Value feat = m.fe.forward(g, obs);
  nn::Value h = a.gru.forward(g, feat, h_prev);
  nn::Value q = a.q_head.forward(g, a.ln.forward(g, h));
  return {q, h};
}

int argmax_row(const nn::Tensor& t, int row) {
  int best = 0;
  for (int c = 1; c < t.cols(); ++c)
    if (t.at(row, c) > t.at(row, best)) best = c;
  return best;
}

std::vector<double> message_row(const Message& msg, int n_actions) {
  std::vector<double> row = msg.obs;
  for (int a = 0; a < n_actions; ++a) row.push_back(a == msg.action ? 1.0 : 0.0);
  return row;
}

nn::Value encode_messages(nn::Graph& g, ComixModel& m, int agent,
                          const nn::Tensor& rows,
                          const std::vector<double>& delay_scale) {
  if (rows.cols() != m.cfg.msg_width())
    throw ContractViolation("encode_messages: message width mismatch");
  nn::Value enc = m.agents[agent].msg_enc.forward(g, g.constant(rows));
  bool attenuated = false;
  for (double s : delay_scale) attenuated = attenuated || s != 1.0;
  if (attenuated) enc = g.scale_rows(enc, delay_scale);
  return enc;
}

nn::Value aggregate_messages(nn::Graph& g, nn::Value encodings,
                             const nn::Tensor& select) {
  if (select.cols() != encodings.rows())
    throw ContractViolation("aggregate_messages: selector/encoding mismatch");
  return g.matmul(g.constant(select), encodings);
}

nn::Value coord_weights(nn::Graph& g, ComixModel& m, int agent, nn::Value h,
                        nn::Value avg_enc) {
  nn::Value in = g.concat_cols({h, avg_enc});
  return m.agents[agent].weight_head.forward(g, in);
}

int act_epsilon_greedy(const nn::Tensor& q_row, double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw ContractViolation("act: epsilon out of [0,1]");
  if (epsilon > 0.0 && uniform(rng, 0.0, 1.0) < epsilon)
    return uniform_int(rng, 0, q_row.cols() - 1);
  return argmax_row(q_row, 0);
}

}  // namespace comix::policy
