#include "comix/model.hpp"

#include "comix/errors.hpp"

namespace comix {

ComixModel::ComixModel(const ModelConfig& c, uint64_t seed) : cfg(c) {
  if (cfg.obs_width < 1 || cfg.n_agents < 1 || cfg.hidden < 1)
    throw ConfigError("model: bad dimensions");
  const int H = cfg.hidden;
  const int A = cfg.n_actions;
  const int MW = cfg.msg_width();
  const int S = cfg.state_width();

  Rng qr = make_rng(seed, "init.q");
  Rng cr = make_rng(seed, "init.c");

  fe = nn::MLP2(q_params, qr, "fe", cfg.obs_width, H, H, nn::Act::Relu, nn::Act::Relu);
  agents.reserve(cfg.n_agents);
  for (int i = 0; i < cfg.n_agents; ++i) {
    std::string p = "agent" + std::to_string(i);
    AgentNet a;
    a.gru = nn::GRUCell(q_params, qr, p + ".gru", H, H);
    a.ln = nn::LayerNormCol(q_params, p + ".ln", H);
    a.q_head = nn::Linear(q_params, qr, p + ".q_head", H, A);
    a.msg_enc = nn::MLP2(q_params, qr, p + ".msg_enc", MW, H, H, nn::Act::Relu,
                         nn::Act::Relu);
    a.weight_head = nn::MLP2(q_params, qr, p + ".weight_head", 2 * H, H, A,
                             nn::Act::Relu, nn::Act::Sigmoid);
    a.co_fwd = nn::GRUCell(c_params, cr, p + ".co_fwd", 2 * MW, H);
    a.co_bwd = nn::GRUCell(c_params, cr, p + ".co_bwd", 2 * MW, H);
    a.co_ln = nn::LayerNormCol(c_params, p + ".co_ln", 2 * H);
    a.co_mlp = nn::MLP2(c_params, cr, p + ".co_mlp", 2 * H, H, 2, nn::Act::Relu,
                        nn::Act::None);
    agents.push_back(std::move(a));
  }
  mix_w1 = nn::Linear(q_params, qr, "mixer.w1", S, cfg.n_agents * cfg.mixer_h1);
  mix_b1 = nn::Linear(q_params, qr, "mixer.b1", S, cfg.mixer_h1);
  mix_w2 = nn::Linear(q_params, qr, "mixer.w2", S, cfg.mixer_h1 * cfg.mixer_h2);
  mix_b2 = nn::Linear(q_params, qr, "mixer.b2", S, cfg.mixer_h2);
  mix_w3 = nn::Linear(q_params, qr, "mixer.w3", S, cfg.mixer_h2);
  mix_b3 = nn::Linear(q_params, qr, "mixer.b3", S, 1);
}

void ComixModel::copy_values_from(const ComixModel& src) {
  q_params.copy_values_from(src.q_params);
  c_params.copy_values_from(src.c_params);
}

}  // namespace comix
