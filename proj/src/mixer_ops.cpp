#include "comix/errors.hpp"
#include "comix/model.hpp"

namespace comix::mixer {

nn::Value mix(nn::Graph& g, ComixModel& m, nn::Value q, nn::Value state) {
  if (q.cols() != m.cfg.n_agents || state.cols() != m.cfg.state_width())
    throw ContractViolation("mix: shape mismatch");
  const int n = m.cfg.n_agents, h1 = m.cfg.mixer_h1, h2 = m.cfg.mixer_h2;
  nn::Value w1 = g.abs(m.mix_w1.forward(g, state));   // [B x n*h1]
  nn::Value b1 = m.mix_b1.forward(g, state);
  nn::Value l1 = g.relu(g.add(g.hyper_matvec(w1, q, n, h1), b1));
  nn::Value w2 = g.abs(m.mix_w2.forward(g, state));   // [B x h1*h2]
  nn::Value b2 = m.mix_b2.forward(g, state);
  nn::Value l2 = g.relu(g.add(g.hyper_matvec(w2, l1, h1, h2), b2));
  nn::Value w3 = g.abs(m.mix_w3.forward(g, state));   // [B x h2]
  nn::Value b3 = m.mix_b3.forward(g, state);
  return g.add(g.hyper_matvec(w3, l2, h2, 1), b3);    // [B x 1]
}

nn::Tensor agent_weights(ComixModel& m, const nn::Tensor& state) {
  nn::Graph g;
  nn::Value w1 = g.abs(m.mix_w1.forward(g, g.constant(state)));
  const nn::Tensor& w = w1.val();  // [B x n*h1], row-major (n x h1) blocks
  const int n = m.cfg.n_agents, h1 = m.cfg.mixer_h1;
  nn::Tensor out = nn::Tensor::zeros(state.rows(), n);
  for (int r = 0; r < state.rows(); ++r)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = 0; k < h1; ++k) s += w.at(r, i * h1 + k);
      out.at(r, i) = s / h1;
    }
  return out;
}

}  // namespace comix::mixer
