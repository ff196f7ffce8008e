#include "comix/trainer.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <utility>

#include "comix/errors.hpp"

namespace comix {

using nn::Graph;
using nn::Tensor;
using nn::Value;

TrainConfig TrainConfig::defaults_for(EnvKind k) {
  TrainConfig t;
  switch (k) {
    case EnvKind::Switch:
      t.recurrent_steps = 2;
      t.min_buffer = 1000;
      t.episodes = 2500;
      break;
    case EnvKind::Transport:
      t.recurrent_steps = 2;
      t.min_buffer = 5000;
      t.episodes = 3000;
      break;
    case EnvKind::PredatorPrey:
      t.recurrent_steps = 10;
      t.min_buffer = 5000;
      t.episodes = 1500;
      break;
  }
  return t;
}

void TrainConfig::validate() const {
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0,1]");
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  if (recurrent_steps <= 0) throw ConfigError("recurrent steps must be positive");
  if (q_update_interval <= 0 || coord_update_interval <= 0 || target_update_interval <= 0)
    throw ConfigError("update intervals must be positive");
  if (target_update_episodes < 0)
    throw ConfigError("target update episode cadence must be non-negative");
  if (q_lr < 0.0 || coord_lr < 0.0 || weight_decay < 0.0)
    throw ConfigError("learning rates and weight decay must be non-negative");
  if (smoothing <= 0.0 || smoothing >= 1.0) throw ConfigError("smoothing must lie in (0,1)");
  if (min_buffer <= 0 || max_buffer < min_buffer)
    throw ConfigError("buffer bounds invalid: need 0 < min <= max");
  if (episodes <= 0) throw ConfigError("episode budget must be positive");
  if (eps_start < 0.0 || eps_start > 1.0 || eps_final < 0.0 || eps_final > 1.0)
    throw ConfigError("epsilon bounds must lie in [0,1]");
  if (eps_anneal_fraction <= 0.0 || eps_anneal_fraction > 1.0)
    throw ConfigError("epsilon anneal fraction must lie in (0,1]");
  if (coord_fresh_window <= 0) throw ConfigError("coordinator sample window must be positive");
}

// ---- TD batching ----

namespace {

const StepData* step_at(const ReplayBuffer::Anchor& a, int t) {
  const size_t idx = static_cast<size_t>(a.start) + static_cast<size_t>(t);
  return idx < a.ep->steps.size() ? &a.ep->steps[idx] : nullptr;
}

}  // namespace

TdBatch build_td_batch(const ModelConfig& mc,
                       const std::vector<ReplayBuffer::Anchor>& anchors, int T,
                       bool delay_scaling) {
  const int B = static_cast<int>(anchors.size());
  const int n = mc.n_agents, A = mc.n_actions, ow = mc.obs_width, H = mc.hidden;
  if (B == 0) throw ContractViolation("TD batch needs at least one anchor");
  TdBatch tb;
  tb.B = B;
  tb.T = T;
  tb.h0.assign(n, Tensor::zeros(B, H));
  tb.obs.assign(n, std::vector<Tensor>(T + 1, Tensor::zeros(B, ow)));
  tb.act1h.assign(n, std::vector<Tensor>(T, Tensor::zeros(B, A)));
  tb.msgs.assign(n, std::vector<MsgFold>(T + 1));
  tb.state.assign(T + 1, Tensor::zeros(B, mc.state_width()));
  tb.r_team.assign(T, std::vector<double>(B, 0.0));
  tb.terminal.assign(T, std::vector<char>(B, 0));
  tb.valid.assign(T, std::vector<char>(B, 0));
  tb.alive.assign(T + 1, std::vector<char>(static_cast<size_t>(B) * n, 0));
  tb.q_self_stored.assign(n, std::vector<Tensor>(T + 1, Tensor::zeros(B, A)));

  for (int b = 0; b < B; ++b) {
    const auto& a = anchors[b];
    const StepData& first = a.ep->steps[a.start];
    for (int i = 0; i < n; ++i)
      for (int h = 0; h < H; ++h) tb.h0[i].at(b, h) = first.hidden_in[i].at(0, h);
    for (int t = 0; t <= T; ++t) {
      const StepData* s = step_at(a, t);
      if (s == nullptr) break;
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < ow; ++k) {
          tb.obs[i][t].at(b, k) = s->obs[i][k];
          tb.state[t].at(b, i * ow + k) = s->obs[i][k];
        }
        tb.alive[t][static_cast<size_t>(b) * n + i] = s->alive[i] ? 1 : 0;
        for (int k = 0; k < A; ++k) tb.q_self_stored[i][t].at(b, k) = s->q_self[i][k];
      }
      if (t < T) {
        tb.valid[t][b] = 1;
        double r = 0.0;
        for (double ri : s->rewards) r += ri;
        tb.r_team[t][b] = r;
        tb.terminal[t][b] = s->terminal ? 1 : 0;
        for (int i = 0; i < n; ++i)
          if (s->alive[i]) tb.act1h[i][t].at(b, s->actions[i]) = 1.0;
      }
    }
  }

  // Message folds: stack every accepted message row across the batch and
  // aggregate with a row-stochastic selection matrix. Accept bits come from
  // the stored acting-time coordinator probabilities.
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t <= T; ++t) {
      std::vector<std::vector<double>> rows;
      std::vector<double> facs;
      std::vector<std::pair<int, int>> span(B, {0, 0});
      for (int b = 0; b < B; ++b) {
        const StepData* s = step_at(anchors[b], t);
        if (s == nullptr || !s->alive[i]) continue;
        const int start = static_cast<int>(rows.size());
        int cnt = 0, pj = 0;
        for (const Message& msg : s->delivered) {
          if (msg.sender == i) continue;
          const double p = s->soft_mask[i][pj++];
          if (coord::accept_bit(p)) {
            rows.push_back(policy::message_row(msg, A));
            facs.push_back(delay_scaling ? delay_scale_factor(msg.age) : 1.0);
            ++cnt;
          }
        }
        span[b] = {start, cnt};
      }
      MsgFold f;
      if (!rows.empty()) {
        f.empty = false;
        f.rows = Tensor::zeros(static_cast<int>(rows.size()), mc.msg_width());
        for (int r = 0; r < static_cast<int>(rows.size()); ++r)
          for (int k = 0; k < mc.msg_width(); ++k) f.rows.at(r, k) = rows[r][k];
        f.factors = std::move(facs);
        f.select = Tensor::zeros(B, static_cast<int>(rows.size()));
        for (int b = 0; b < B; ++b)
          for (int k = 0; k < span[b].second; ++k)
            f.select.at(b, span[b].first + k) = 1.0 / span[b].second;
      }
      tb.msgs[i][t] = std::move(f);
    }
  }
  return tb;
}

UnrollOut unroll_q(Graph& g, ComixModel& m, const TdBatch& batch, int t_begin,
                   int t_end) {
  const int n = m.cfg.n_agents;
  UnrollOut out;
  out.q_comb.assign(n, {});
  out.q_self.assign(n, {});
  for (int i = 0; i < n; ++i) {
    Value h = g.constant(batch.h0[i]);
    for (int t = 0; t < t_end; ++t) {
      auto core = policy::core_forward(g, m, i, g.constant(batch.obs[i][t]), h);
      h = core.h_next;
      if (t < t_begin) continue;
      const MsgFold& f = batch.msgs[i][t];
      Value avg = f.empty
                      ? g.zeros(batch.B, m.cfg.hidden)
                      : policy::aggregate_messages(
                            g, policy::encode_messages(g, m, i, f.rows, f.factors),
                            f.select);
      Value w = policy::coord_weights(g, m, i, h, avg);
      out.q_self[i].push_back(core.q_self);
      out.q_comb[i].push_back(policy::q_combined(g, core.q_self, w));
    }
  }
  return out;
}

namespace {

// Builds targets from already-computed online Q values (selector(i, t) for
// t in 1..T). Runs its own grad-free target-network graph.
TdTargets assemble_targets(ComixModel& target, const TdBatch& batch, double gamma,
                           const std::function<const Tensor&(int, int)>& selector) {
  const int B = batch.B, T = batch.T;
  const int n = target.cfg.n_agents, A = target.cfg.n_actions;
  Graph gt;
  UnrollOut tgt = unroll_q(gt, target, batch, 1, T + 1);
  std::vector<Tensor> qnext(T + 1);
  for (int t = 1; t <= T; ++t) {
    std::vector<Value> chosen(n);
    for (int i = 0; i < n; ++i) {
      Tensor onehot = Tensor::zeros(B, A);
      {
        const Tensor& qs = selector(i, t);
        for (int b = 0; b < B; ++b)
          if (batch.alive[t][static_cast<size_t>(b) * n + i])
            onehot.at(b, policy::argmax_row(qs, b)) = 1.0;
      }
      chosen[i] = gt.row_sum(gt.mul(tgt.q_comb[i][t - 1], gt.constant(onehot)));
    }
    Value qvec = gt.concat_cols(chosen);
    qnext[t] = mixer::mix(gt, target, qvec, gt.constant(batch.state[t])).val();
  }
  TdTargets out;
  out.y = Tensor::zeros(T * B, 1);
  out.w = Tensor::zeros(T * B, 1);
  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < B; ++b) {
      if (!batch.valid[t][b]) continue;
      out.w.at(t * B + b, 0) = 1.0;
      out.sum_w += 1.0;
      double y = batch.r_team[t][b];
      if (!batch.terminal[t][b]) y += gamma * qnext[t + 1].at(b, 0);
      out.y.at(t * B + b, 0) = y;
    }
  }
  return out;
}

// Loss body over an existing unroll whose q_comb[i][t] covers t in 0..T-1.
Value td_loss_from(Graph& g, ComixModel& online, const TdBatch& batch,
                   const TdTargets& tg, const UnrollOut& un) {
  const int T = batch.T, n = online.cfg.n_agents;
  std::vector<Value> qtots;
  qtots.reserve(T);
  for (int t = 0; t < T; ++t) {
    std::vector<Value> chosen(n);
    for (int i = 0; i < n; ++i)
      chosen[i] = g.row_sum(g.mul(un.q_comb[i][t], g.constant(batch.act1h[i][t])));
    Value qvec = g.concat_cols(chosen);
    qtots.push_back(mixer::mix(g, online, qvec, g.constant(batch.state[t])));
  }
  Value stacked = T == 1 ? qtots[0] : g.stack_rows(qtots);
  Value err = g.abs(g.sub(stacked, g.constant(tg.y)));
  return g.scalar_mul(g.sum_all(g.mul(err, g.constant(tg.w))),
                      1.0 / std::max(1.0, tg.sum_w));
}

}  // namespace

TdTargets compute_td_targets(ComixModel& online, ComixModel& target,
                             const TdBatch& batch, double gamma) {
  Graph gs;
  UnrollOut sel = unroll_q(gs, online, batch, 1, batch.T + 1);
  return assemble_targets(target, batch, gamma,
                          [&](int i, int t) -> const Tensor& {
                            return sel.q_comb[i][t - 1].val();
                          });
}

Value td_loss(Graph& g, ComixModel& online, const TdBatch& batch,
              const TdTargets& tg) {
  UnrollOut un = unroll_q(g, online, batch, 0, batch.T);
  return td_loss_from(g, online, batch, tg, un);
}

// ---- Contrastive preparation ----

CoordPrep prepare_coord_batch(ComixModel& m, const ModelConfig& mc,
                              const std::vector<const StepData*>& steps,
                              bool delay_scaling) {
  const int n = mc.n_agents, A = mc.n_actions, ow = mc.obs_width, H = mc.hidden;
  CoordPrep prep;
  prep.batch_size = std::max<int>(1, static_cast<int>(steps.size()));

  struct Item {
    int b = 0;
    const Message* own = nullptr;
    std::vector<const Message*> peers;
  };
  std::map<std::pair<int, int>, std::vector<Item>> groups;
  for (int b = 0; b < static_cast<int>(steps.size()); ++b) {
    const StepData* s = steps[b];
    for (int i = 0; i < n; ++i) {
      if (!s->alive[i]) continue;
      Item it;
      it.b = b;
      for (const Message& msg : s->delivered)
        if (msg.sender != i) it.peers.push_back(&msg);
      if (it.peers.empty()) continue;
      for (const Message& ms : s->sent)
        if (ms.sender == i) it.own = &ms;
      if (it.own == nullptr) continue;
      groups[{i, static_cast<int>(it.peers.size())}].push_back(std::move(it));
    }
  }

  Graph gq;  // scratch forwards; nothing here receives gradients
  double gap_sum = 0.0;
  for (auto& [key, items] : groups) {
    const int agent = key.first, P = key.second;
    const int Bg = static_cast<int>(items.size());
    CoordPrep::Bucket bk;
    bk.agent = agent;
    bk.len = P;
    bk.seq.assign(P, Tensor::zeros(Bg, 2 * mc.msg_width()));
    for (int r = 0; r < Bg; ++r) {
      const std::vector<double> own = policy::message_row(*items[r].own, A);
      for (int p = 0; p < P; ++p) {
        const std::vector<double> peer = policy::message_row(*items[r].peers[p], A);
        for (int k = 0; k < mc.msg_width(); ++k) {
          bk.seq[p].at(r, k) = own[k];
          bk.seq[p].at(r, mc.msg_width() + k) = peer[k];
        }
      }
    }
    // Current-coordinator probabilities decide both mask variants.
    std::vector<Value> seqv;
    seqv.reserve(P);
    for (const Tensor& t : bk.seq) seqv.push_back(gq.constant(t));
    const Tensor probs = coord::coordinate_folded(gq, m, agent, seqv).val();

    // Q side: shared recurrent state and encodings, two aggregation masks.
    Tensor obs = Tensor::zeros(Bg, ow), h0 = Tensor::zeros(Bg, H);
    Tensor state = Tensor::zeros(Bg, mc.state_width());
    for (int r = 0; r < Bg; ++r) {
      const StepData* s = steps[items[r].b];
      for (int k = 0; k < ow; ++k) obs.at(r, k) = s->obs[agent][k];
      for (int k = 0; k < H; ++k) h0.at(r, k) = s->hidden_in[agent].at(0, k);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < ow; ++k) state.at(r, i * ow + k) = s->obs[i][k];
    }
    auto core = policy::core_forward(gq, m, agent, gq.constant(obs), gq.constant(h0));
    Tensor rows = Tensor::zeros(Bg * P, mc.msg_width());
    std::vector<double> facs(static_cast<size_t>(Bg) * P, 1.0);
    for (int r = 0; r < Bg; ++r)
      for (int p = 0; p < P; ++p) {
        const std::vector<double> mr = policy::message_row(*items[r].peers[p], A);
        for (int k = 0; k < mc.msg_width(); ++k) rows.at(r * P + p, k) = mr[k];
        if (delay_scaling) facs[static_cast<size_t>(r) * P + p] =
            delay_scale_factor(items[r].peers[p]->age);
      }
    Value enc = policy::encode_messages(gq, m, agent, rows, facs);
    Tensor sel_bar = Tensor::zeros(Bg, Bg * P), sel_til = Tensor::zeros(Bg, Bg * P);
    bk.sign = Tensor::zeros(Bg, P);
    bk.offset = Tensor::zeros(Bg, P);
    for (int r = 0; r < Bg; ++r) {
      int nb = 0, nt = 0;
      for (int p = 0; p < P; ++p) (coord::accept_bit(probs.at(r, p)) ? nb : nt) += 1;
      for (int p = 0; p < P; ++p) {
        const bool acc = coord::accept_bit(probs.at(r, p));
        bk.sign.at(r, p) = acc ? 1.0 : -1.0;
        bk.offset.at(r, p) = acc ? 0.0 : 1.0;
        if (acc) sel_bar.at(r, r * P + p) = 1.0 / nb;
        if (mc.soft_complement) continue;
        if (!acc) sel_til.at(r, r * P + p) = 1.0 / nt;
      }
      if (mc.soft_complement) {
        double tot = 0.0;
        for (int p = 0; p < P; ++p) tot += 1.0 - probs.at(r, p);
        if (tot > 1e-12)
          for (int p = 0; p < P; ++p)
            sel_til.at(r, r * P + p) = (1.0 - probs.at(r, p)) / tot;
      }
    }
    auto max_q = [&](const Tensor& sel) {
      Value w = policy::coord_weights(gq, m, agent, core.h_next,
                                      policy::aggregate_messages(gq, enc, sel));
      const Tensor q = policy::q_combined(gq, core.q_self, w).val();
      std::vector<double> v(Bg);
      for (int r = 0; r < Bg; ++r) v[r] = q.at(r, policy::argmax_row(q, r));
      return v;
    };
    const std::vector<double> vbar = max_q(sel_bar);
    const std::vector<double> vtil = max_q(sel_til);
    const Tensor wmix = mixer::agent_weights(m, state);
    bk.coeff.assign(Bg, 0.0);
    for (int r = 0; r < Bg; ++r) {
      const double gap = std::max(0.0, vtil[r] - vbar[r]);
      bk.coeff[r] = wmix.at(r, agent) * gap;
      if (gap > 0.0) {
        ++prep.active;
        gap_sum += gap;
      }
    }
    prep.buckets.push_back(std::move(bk));
  }
  prep.mean_gap = prep.active > 0 ? gap_sum / prep.active : 0.0;
  return prep;
}

Value coord_loss(Graph& g, ComixModel& m, const CoordPrep& prep) {
  Value total;
  bool any = false;
  for (const auto& bk : prep.buckets) {
    std::vector<Value> seqv;
    seqv.reserve(bk.seq.size());
    for (const Tensor& t : bk.seq) seqv.push_back(g.constant(t));
    Value probs = coord::coordinate_folded(g, m, bk.agent, seqv);
    Value conf = g.add(g.mul(probs, g.constant(bk.sign)), g.constant(bk.offset));
    Value term = g.sum_all(g.scale_rows(conf, bk.coeff));
    total = any ? g.add(total, term) : term;
    any = true;
  }
  if (!any) total = g.zeros(1, 1);
  return g.scalar_mul(total, 1.0 / prep.batch_size);
}

// ---- Trainer ----

namespace {

ModelConfig model_config_for(const EnvConfig& ec) {
  ModelConfig m;
  m.obs_width = ec.obs_width;
  m.n_agents = ec.n_agents;
  m.n_actions = ec.n_actions;
  return m;
}

ChannelConfig seeded_channel(const ChannelConfig& cc, uint64_t train_seed) {
  ChannelConfig c = cc;
  if (c.seed == 0) c.seed = mix_seed(train_seed ^ fnv1a("channel"));
  return c;
}

}  // namespace

Trainer::Trainer(const EnvConfig& ec, const TrainConfig& tc, const ChannelConfig& cc)
    : ecfg_(ec),
      tcfg_(tc),
      ccfg_(seeded_channel(cc, tc.seed)),
      mcfg_(model_config_for(ec)),
      online_(mcfg_, tc.seed),
      target_(mcfg_, tc.seed),
      q_opt_(online_.q_params, tc.q_lr, tc.weight_decay, tc.smoothing),
      c_opt_(online_.c_params, tc.coord_lr, tc.weight_decay, tc.smoothing),
      buffer_(static_cast<size_t>(tc.max_buffer)),
      env_(make_env(ec)),
      channel_(ccfg_, ec.n_agents, ec.obs_width),
      explore_rng_(make_rng(tc.seed, "explore")),
      sample_q_rng_(make_rng(tc.seed, "sample.q")),
      sample_c_rng_(make_rng(tc.seed, "sample.c")) {
  tcfg_.validate();
  target_.copy_values_from(online_);
}

double Trainer::epsilon_at(int episode) const {
  const double span = std::max(1.0, tcfg_.eps_anneal_fraction * tcfg_.episodes);
  const double f = std::min(1.0, episode / span);
  return tcfg_.eps_start + (tcfg_.eps_final - tcfg_.eps_start) * f;
}

Trainer::RolloutResult Trainer::rollout(Env& env, BroadcastChannel& ch, Rng& act_rng,
                                        uint64_t ep_seed, const RolloutOptions& opts) {
  const int n = mcfg_.n_agents, A = mcfg_.n_actions, H = mcfg_.hidden;
  RolloutResult res;
  res.agent_returns.assign(n, 0.0);
  auto obs = env.reset(ep_seed);
  ch.reset(ep_seed);
  std::vector<Tensor> hidden(n, online_.zero_hidden());
  std::vector<char> alive(n, 1);
  double frac_sum = 0.0;
  long frac_cnt = 0;

  while (!env.episode_over()) {
    Graph g;
    std::vector<policy::CoreOut> core(n);
    std::vector<Message> sent;
    for (int i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      core[i] = policy::core_forward(g, online_, i, g.constant(Tensor::row(obs[i])),
                                     g.constant(hidden[i]));
      sent.push_back({i, obs[i], policy::argmax_row(core[i].q_self.val(), 0), 0});
    }
    std::vector<Message> delivered;
    if (opts.comm) delivered = ch.broadcast(sent);

    std::vector<int> actions(n, 4);
    std::vector<std::vector<double>> soft_masks(n);
    for (int i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      Value avg;
      if (opts.comm) {
        const Message* own = nullptr;
        for (const Message& ms : sent)
          if (ms.sender == i) own = &ms;
        std::vector<const Message*> peers;
        for (const Message& msg : delivered)
          if (msg.sender != i) peers.push_back(&msg);
        Tensor probs;
        if (!peers.empty()) {
          probs = coord::coordinate_probs(online_, i, coord::build_pairs(*own, delivered, A));
        }
        std::vector<std::vector<double>> rows;
        std::vector<double> facs;
        MaskTraceRecord tr;
        for (int p = 0; p < static_cast<int>(peers.size()); ++p) {
          const double pr = probs.at(0, p);
          soft_masks[i].push_back(pr);
          const bool acc = coord::accept_bit(pr);
          if (opts.collect_traces) {
            tr.senders.push_back(peers[p]->sender);
            tr.probs.push_back(pr);
            tr.bits.push_back(acc ? 1 : 0);
          }
          if (acc) {
            rows.push_back(policy::message_row(*peers[p], A));
            facs.push_back(opts.delay_scaling ? delay_scale_factor(peers[p]->age) : 1.0);
          }
        }
        frac_sum += static_cast<double>(rows.size()) / n;
        ++frac_cnt;
        if (opts.collect_traces) {
          tr.episode = opts.episode_index;
          tr.step = env.steps_taken();
          tr.agent = i;
          res.traces.push_back(std::move(tr));
        }
        if (!rows.empty()) {
          Tensor rt = Tensor::zeros(static_cast<int>(rows.size()), mcfg_.msg_width());
          for (int r = 0; r < rt.rows(); ++r)
            for (int k = 0; k < rt.cols(); ++k) rt.at(r, k) = rows[r][k];
          Tensor select = Tensor::full(1, rt.rows(), 1.0 / rt.rows());
          avg = policy::aggregate_messages(
              g, policy::encode_messages(g, online_, i, rt, facs), select);
        } else {
          avg = g.zeros(1, H);
        }
      } else {
        avg = g.zeros(1, H);
      }
      Value w = policy::coord_weights(g, online_, i, core[i].h_next, avg);
      Value qc = policy::q_combined(g, core[i].q_self, w);
      actions[i] = policy::act_epsilon_greedy(qc.val(), opts.epsilon, act_rng);
    }

    StepData sd;
    if (opts.record) {
      sd.obs = obs;
      sd.hidden_in = hidden;
      sd.sent = sent;
      sd.delivered = delivered;
      sd.soft_mask = soft_masks;
      sd.actions = actions;
      sd.alive.assign(n, false);
      sd.q_self.assign(n, std::vector<double>(A, 0.0));
      for (int i = 0; i < n; ++i) {
        sd.alive[i] = alive[i] != 0;
        if (alive[i]) {
          const Tensor& q = core[i].q_self.val();
          for (int k = 0; k < A; ++k) sd.q_self[i][k] = q.at(0, k);
        }
      }
    }
    for (int i = 0; i < n; ++i)
      if (alive[i]) hidden[i] = core[i].h_next.val();

    StepResult sr = env.step(actions);
    for (int i = 0; i < n; ++i) res.agent_returns[i] += sr.rewards[i];
    if (opts.record) {
      sd.rewards = sr.rewards;
      sd.terminal = sr.episode_done;
      res.data.steps.push_back(std::move(sd));
    }
    obs = sr.obs;
    for (int i = 0; i < n; ++i)
      if (sr.agent_done[i]) alive[i] = 0;
    if (opts.on_step) opts.on_step();
  }

  res.team_return = env.team_return();
  res.headline = env.headline_metric();
  res.steps = env.steps_taken();
  if (frac_cnt > 0) res.accepted_fraction = frac_sum / frac_cnt;
  return res;
}

void Trainer::train(const std::function<bool(const EpisodeStats&)>& cb) {
  const uint64_t ep_stream = mix_seed(tcfg_.seed ^ fnv1a("episodes"));
  while (episode_ < tcfg_.episodes) {
    const double eps = epsilon_at(episode_);
    const uint64_t ep_seed =
        mix_seed(ep_stream + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(episode_ + 1));
    RolloutOptions ro;
    ro.epsilon = eps;
    ro.comm = tcfg_.comm_enabled;
    ro.delay_scaling = ccfg_.delay_scaling;
    ro.record = true;
    ro.episode_index = episode_;
    ro.on_step = [this] {
      ++env_steps_;
      const bool warm = buffer_.ready(static_cast<size_t>(tcfg_.min_buffer));
      if (warm && env_steps_ % tcfg_.q_update_interval == 0) last_td_ = td_update();
      if (tcfg_.comm_enabled && !tcfg_.finetune && warm &&
          env_steps_ % tcfg_.coord_update_interval == 0)
        last_lc_ = coord_update();
      if (tcfg_.target_update_episodes <= 0 &&
          env_steps_ % tcfg_.target_update_interval == 0)
        sync_target();
    };
    RolloutResult rr = rollout(*env_, channel_, explore_rng_, ep_seed, ro);
    buffer_.add_episode(std::move(rr.data));
    if (tcfg_.target_update_episodes > 0 &&
        (episode_ + 1) % tcfg_.target_update_episodes == 0)
      sync_target();

    EpisodeStats st;
    st.episode = episode_;
    st.env_steps = env_steps_;
    st.agent_returns = rr.agent_returns;
    st.team_return = rr.team_return;
    st.headline = rr.headline;
    st.epsilon = eps;
    st.td_loss = last_td_;
    st.coord_loss = last_lc_;
    st.accepted_fraction = rr.accepted_fraction;
    st.steps = rr.steps;
    ++episode_;
    if (cb && !cb(st)) break;
  }
}

EvalResult Trainer::evaluate(const EvalOptions& opts) {
  EvalResult er;
  ChannelConfig cc = opts.channel;
  if (cc.seed == 0) cc.seed = mix_seed(opts.seed ^ fnv1a("eval.channel"));
  auto env = make_env(ecfg_);
  BroadcastChannel ch(cc, ecfg_.n_agents, ecfg_.obs_width);
  ch.set_logging(opts.log_channel_events);
  Rng arng = make_rng(opts.seed, "eval.act");
  double frac_sum = 0.0;
  long frac_cnt = 0;
  for (int e = 0; e < opts.episodes; ++e) {
    RolloutOptions ro;
    ro.epsilon = 0.0;
    ro.comm = opts.comm;
    ro.delay_scaling = opts.delay_scaling || cc.delay_scaling;
    ro.collect_traces = opts.collect_traces;
    ro.episode_index = e;
    const uint64_t ep_seed =
        mix_seed(opts.seed + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(e + 1));
    RolloutResult rr = rollout(*env, ch, arng, ep_seed, ro);
    er.headline.push_back(rr.headline);
    er.team_return.push_back(rr.team_return);
    if (std::isfinite(rr.accepted_fraction)) {
      frac_sum += rr.accepted_fraction;
      ++frac_cnt;
    }
    for (auto& t : rr.traces) {
      t.episode = e;
      er.traces.push_back(std::move(t));
    }
    for (const auto& ev : ch.events()) er.channel_events.push_back(ev);
    ch.clear_events();
  }
  const double cnt = std::max<size_t>(1, er.headline.size());
  for (double h : er.headline) er.mean_headline += h / cnt;
  for (double t : er.team_return) er.mean_team_return += t / cnt;
  double var = 0.0;
  for (double h : er.headline) var += (h - er.mean_headline) * (h - er.mean_headline) / cnt;
  er.std_headline = std::sqrt(var);
  if (frac_cnt > 0) er.mean_accepted_fraction = frac_sum / frac_cnt;
  return er;
}

double Trainer::td_update() {
  const auto anchors = buffer_.sample(tcfg_.batch_size, sample_q_rng_);
  const TdBatch tb =
      build_td_batch(mcfg_, anchors, tcfg_.recurrent_steps, ccfg_.delay_scaling);
  // One online unroll serves both the action selection at t+1 and the loss;
  // the step-T outputs never reach the loss so backward skips them.
  Graph g;
  UnrollOut un = unroll_q(g, online_, tb, 0, tb.T + 1);
  const TdTargets tg =
      assemble_targets(target_, tb, tcfg_.gamma, [&](int i, int t) -> const Tensor& {
        return un.q_comb[i][t].val();
      });
  Value loss = td_loss_from(g, online_, tb, tg, un);
  const double lv = loss.val().item();
  if (!std::isfinite(lv)) throw NumericError("TD loss is non-finite");
  online_.q_params.zero_grad();
  g.backward(loss);
  q_opt_.step();
  return lv;
}

double Trainer::coord_update() {
  const auto anchors = buffer_.sample_recent(
      tcfg_.batch_size, static_cast<size_t>(tcfg_.coord_fresh_window), sample_c_rng_);
  std::vector<const StepData*> steps;
  steps.reserve(anchors.size());
  for (const auto& a : anchors) steps.push_back(&a.ep->steps[a.start]);
  const CoordPrep prep = prepare_coord_batch(online_, mcfg_, steps, ccfg_.delay_scaling);
  Graph g;
  Value loss = coord_loss(g, online_, prep);
  const double lv = loss.val().item();
  if (!std::isfinite(lv)) throw NumericError("coordinator loss is non-finite");
  online_.c_params.zero_grad();
  g.backward(loss);
  c_opt_.step();
  return lv;
}

void Trainer::sync_target() { target_.q_params.copy_values_from(online_.q_params); }

CheckpointData Trainer::make_checkpoint() const {
  CheckpointData d;
  d.meta.config_hash = config_hash_;
  d.meta.episode = static_cast<uint64_t>(episode_);
  d.meta.env_steps = env_steps_;
  d.meta.seed = tcfg_.seed;
  d.meta.env_kind = env_kind_name(ecfg_.kind);
  d.meta.n_agents = static_cast<uint32_t>(ecfg_.n_agents);
  d.meta.obs_width = static_cast<uint32_t>(ecfg_.obs_width);
  d.meta.comm_enabled = tcfg_.comm_enabled;
  d.meta.q_opt_steps = q_opt_.steps_taken();
  d.meta.c_opt_steps = c_opt_.steps_taken();
  for (const auto& p : online_.q_params.all()) d.params.push_back({p.name, p.value});
  for (const auto& p : online_.c_params.all()) d.params.push_back({p.name, p.value});
  for (const auto& p : target_.q_params.all())
    d.params.push_back({"target/" + p.name, p.value});
  size_t k = 0;
  for (const auto& p : online_.q_params.all())
    d.rms_acc.push_back({"q/" + p.name, q_opt_.accumulators()[k++]});
  k = 0;
  for (const auto& p : online_.c_params.all())
    d.rms_acc.push_back({"c/" + p.name, c_opt_.accumulators()[k++]});
  return d;
}

void Trainer::load(const CheckpointData& d) {
  std::map<std::string, const Tensor*> by;
  for (const auto& [name, t] : d.params) by[name] = &t;
  auto restore = [&](nn::ParamStore& ps, const std::string& prefix) {
    for (auto& p : ps.all()) {
      auto it = by.find(prefix + p.name);
      if (it == by.end())
        throw ConfigError("checkpoint is missing parameter " + prefix + p.name);
      if (!p.value.same_shape(*it->second))
        throw ConfigError("checkpoint shape mismatch for " + prefix + p.name);
      p.value = *it->second;
    }
  };
  restore(online_.q_params, "");
  restore(online_.c_params, "");
  restore(target_.q_params, "target/");
  std::map<std::string, const Tensor*> accby;
  for (const auto& [name, t] : d.rms_acc) accby[name] = &t;
  auto restore_acc = [&](nn::ParamStore& ps, nn::RmsProp& opt, const std::string& prefix) {
    size_t k = 0;
    for (const auto& p : ps.all()) {
      auto it = accby.find(prefix + p.name);
      if (it == accby.end())
        throw ConfigError("checkpoint is missing optimizer state " + prefix + p.name);
      if (!opt.accumulators()[k].same_shape(*it->second))
        throw ConfigError("checkpoint optimizer shape mismatch for " + prefix + p.name);
      opt.accumulators()[k] = *it->second;
      ++k;
    }
  };
  restore_acc(online_.q_params, q_opt_, "q/");
  restore_acc(online_.c_params, c_opt_, "c/");
  q_opt_.set_steps_taken(d.meta.q_opt_steps);
  c_opt_.set_steps_taken(d.meta.c_opt_steps);
  episode_ = 0;
  env_steps_ = 0;
  last_td_ = std::nan("");
  last_lc_ = std::nan("");
}

}  // namespace comix
