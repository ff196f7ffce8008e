// End-to-end acceptance suite. Prints one pass/fail line per criterion and
// exits nonzero if any failed. Training-backed criteria persist their runs
// under COMIX_ACCEPT_DIR (default ./acceptance_runs) keyed by config hash,
// so a re-run with unchanged configs only re-reads artifacts.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "comix/config.hpp"
#include "comix/harness.hpp"
#include "comix/trainer.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using namespace comix;
using namespace comix::nn;

namespace {

struct Criterion {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<Criterion> g_results;

void record(int id, const std::string& name, bool pass, const std::string& detail) {
  g_results.push_back({id, name, pass, detail});
  std::cerr << "[criterion " << id << "] " << (pass ? "PASS" : "FAIL") << " — "
            << detail << "\n";
}

std::string accept_dir() {
  const char* d = std::getenv("COMIX_ACCEPT_DIR");
  return d && *d ? std::string(d) : std::string("acceptance_runs");
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

std::vector<std::string> file_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ostringstream g_sink;  // harness progress logs we don't need on screen

// Runs training once per config; later invocations with the same hash and a
// complete report reuse the artifacts.
bool ensure_trained(const ExperimentConfig& cfg, const std::string& label) {
  const std::string ini = cfg.output_dir + "/config.ini";
  const std::string report = cfg.output_dir + "/train_report.jsonl";
  if (fs::exists(ini) && fs::exists(report)) {
    try {
      const bool same = ExperimentConfig::from_file(ini).hash() == cfg.hash();
      bool complete = file_lines(report).size() == cfg.seeds.size();
      for (uint64_t s : cfg.seeds)
        complete = complete && fs::exists(cfg.output_dir + "/seed_" +
                                          std::to_string(s) + "/checkpoint_final.ckpt");
      if (same && complete) {
        std::cerr << "[train] " << label << ": cached (" << cfg.hash() << ")\n";
        return true;
      }
    } catch (const std::exception&) {
      // stale or unreadable cache: retrain below
    }
  }
  std::cerr << "[train] " << label << ": training " << cfg.seeds.size()
            << " seeds into " << cfg.output_dir << "\n";
  fs::remove_all(cfg.output_dir);
  std::ofstream live(cfg.output_dir + ".log", std::ios::trunc);
  if (!live.is_open()) return run_train(cfg, g_sink) == 0;
  return run_train(cfg, live) == 0;
}

// Parses the last "elapsed_s <v>" occurrence in a run log.
double last_elapsed_seconds(const std::string& path) {
  double out = -1.0;
  for (const std::string& line : file_lines(path)) {
    const auto pos = line.rfind("elapsed_s ");
    if (pos == std::string::npos) continue;
    out = std::atof(line.c_str() + pos + 10);
  }
  return out;
}

// ---- criterion 1: gradient correctness per network ----

void criterion_gradients() {
  constexpr int kInstances = 100;
  constexpr double kRelTol = 1e-4;
  struct Net {
    std::string name;
    double worst = 0.0;
    int checked = 0;
  };
  std::vector<Net> nets;

  auto weighted_sum = [](Graph& g, Value out, const Tensor& w) {
    return g.sum_all(g.mul(out, g.constant(w)));
  };

  // Feature extractor: two-layer MLP, relu/relu as in the agent stack.
  {
    Net net{"feature extractor", 0.0, 0};
    for (int inst = 0; inst < kInstances; ++inst) {
      Rng rng = make_rng(2000 + inst, "accept.c1.fe");
      const int in = uniform_int(rng, 3, 8), hid = uniform_int(rng, 4, 9);
      const int out = uniform_int(rng, 3, 7), B = uniform_int(rng, 1, 3);
      ParamStore ps;
      MLP2 fe(ps, rng, "fe", in, hid, out, Act::Relu, Act::Relu);
      const Tensor x = testutil::random_tensor(B, in, rng);
      const Tensor w = testutil::random_tensor(B, out, rng);
      auto rep = testutil::grad_check(ps, [&](bool with_grad) {
        Graph g;
        Value loss = weighted_sum(g, fe.forward(g, g.constant(x)), w);
        if (with_grad) g.backward(loss);
        return loss.val().item();
      });
      net.worst = std::max(net.worst, rep.worst_score);
      net.checked += rep.scalars_checked;
    }
    nets.push_back(net);
  }

  // Recurrent core: one GRU cell unrolled two steps, so the hidden-to-hidden
  // path is exercised through reuse.
  {
    Net net{"recurrent core", 0.0, 0};
    for (int inst = 0; inst < kInstances; ++inst) {
      Rng rng = make_rng(3000 + inst, "accept.c1.gru");
      const int in = uniform_int(rng, 3, 7), hid = uniform_int(rng, 3, 7);
      const int B = uniform_int(rng, 1, 3);
      ParamStore ps;
      GRUCell cell(ps, rng, "gru", in, hid);
      const Tensor x0 = testutil::random_tensor(B, in, rng);
      const Tensor x1 = testutil::random_tensor(B, in, rng);
      const Tensor h0 = testutil::random_tensor(B, hid, rng);
      const Tensor w = testutil::random_tensor(B, hid, rng);
      auto rep = testutil::grad_check(ps, [&](bool with_grad) {
        Graph g;
        Value h = cell.forward(g, g.constant(x0), g.constant(h0));
        h = cell.forward(g, g.constant(x1), h);
        Value loss = weighted_sum(g, h, w);
        if (with_grad) g.backward(loss);
        return loss.val().item();
      });
      net.worst = std::max(net.worst, rep.worst_score);
      net.checked += rep.scalars_checked;
    }
    nets.push_back(net);
  }

  // Coordination (weight) head: relu hidden, sigmoid output.
  {
    Net net{"coordination head", 0.0, 0};
    for (int inst = 0; inst < kInstances; ++inst) {
      Rng rng = make_rng(4000 + inst, "accept.c1.wh");
      const int hid = uniform_int(rng, 3, 8), A = uniform_int(rng, 2, 6);
      const int B = uniform_int(rng, 1, 3);
      ParamStore ps;
      MLP2 head(ps, rng, "wh", 2 * hid, hid, A, Act::Relu, Act::Sigmoid);
      const Tensor x = testutil::random_tensor(B, 2 * hid, rng);
      const Tensor w = testutil::random_tensor(B, A, rng);
      auto rep = testutil::grad_check(ps, [&](bool with_grad) {
        Graph g;
        Value loss = weighted_sum(g, head.forward(g, g.constant(x)), w);
        if (with_grad) g.backward(loss);
        return loss.val().item();
      });
      net.worst = std::max(net.worst, rep.worst_score);
      net.checked += rep.scalars_checked;
    }
    nets.push_back(net);
  }

  // Coordinator stack: the production folded forward (BiGRU -> layer norm ->
  // MLP -> two-way softmax) on a small model; the loss reads one agent, the
  // other agent's gradients must agree with finite differences at zero.
  {
    Net net{"coordinator stack", 0.0, 0};
    for (int inst = 0; inst < kInstances; ++inst) {
      Rng rng = make_rng(5000 + inst, "accept.c1.coord");
      ModelConfig mc;
      mc.obs_width = 3;
      mc.n_agents = 2;
      mc.n_actions = 4;
      mc.hidden = 5;
      mc.mixer_h1 = 4;
      mc.mixer_h2 = 3;
      ComixModel m(mc, 5000 + inst);
      const int L = uniform_int(rng, 1, 3), B = uniform_int(rng, 1, 2);
      std::vector<Tensor> seq;
      for (int t = 0; t < L; ++t)
        seq.push_back(testutil::random_tensor(B, 2 * mc.msg_width(), rng));
      const Tensor w = testutil::random_tensor(B, L, rng);
      auto rep = testutil::grad_check(m.c_params, [&](bool with_grad) {
        Graph g;
        std::vector<Value> sv;
        for (const Tensor& t : seq) sv.push_back(g.constant(t));
        Value probs = coord::coordinate_folded(g, m, 0, sv);
        Value loss = weighted_sum(g, probs, w);
        if (with_grad) g.backward(loss);
        return loss.val().item();
      });
      net.worst = std::max(net.worst, rep.worst_score);
      net.checked += rep.scalars_checked;
    }
    nets.push_back(net);
  }

  // Mixer with hypernetworks: loss through the full monotone mix; gradients
  // for the non-mixer entries of the store must agree at zero.
  {
    Net net{"mixer hypernetworks", 0.0, 0};
    for (int inst = 0; inst < kInstances; ++inst) {
      Rng rng = make_rng(6000 + inst, "accept.c1.mix");
      ModelConfig mc;
      mc.obs_width = 2;
      mc.n_agents = uniform_int(rng, 1, 3);
      mc.n_actions = 3;
      mc.hidden = 4;
      mc.mixer_h1 = 4;
      mc.mixer_h2 = 3;
      ComixModel m(mc, 6000 + inst);
      const int B = uniform_int(rng, 1, 3);
      const Tensor q = testutil::random_tensor(B, mc.n_agents, rng, -2.0, 2.0);
      const Tensor st = testutil::random_tensor(B, mc.state_width(), rng);
      const Tensor w = testutil::random_tensor(B, 1, rng);
      auto rep = testutil::grad_check(m.q_params, [&](bool with_grad) {
        Graph g;
        Value out = mixer::mix(g, m, g.constant(q), g.constant(st));
        Value loss = weighted_sum(g, out, w);
        if (with_grad) g.backward(loss);
        return loss.val().item();
      });
      net.worst = std::max(net.worst, rep.worst_score);
      net.checked += rep.scalars_checked;
    }
    nets.push_back(net);
  }

  bool pass = true;
  std::ostringstream d;
  for (const Net& n : nets) {
    const bool ok = n.worst <= 1.0;
    pass = pass && ok;
    d << n.name << " worst " << n.worst << " (" << n.checked << " scalars); ";
  }
  record(1, "gradient correctness vs central differences", pass,
         d.str() + "rel tol " + std::to_string(kRelTol) + ", 100 instances each");
}

// ---- criterion 3: mixer argmax consistency ----

void criterion_argmax() {
  constexpr int kInstances = 100;
  int failures = 0;
  for (int inst = 0; inst < kInstances; ++inst) {
    Rng rng = make_rng(7000 + inst, "accept.c3");
    ModelConfig mc;
    mc.obs_width = uniform_int(rng, 2, 4);
    mc.n_agents = uniform_int(rng, 1, 3);
    mc.n_actions = 5;
    mc.hidden = 4;
    mc.mixer_h1 = uniform_int(rng, 2, 6);
    mc.mixer_h2 = uniform_int(rng, 2, 5);
    ComixModel m(mc, 7000 + inst);
    const int n = mc.n_agents, A = mc.n_actions;
    const Tensor qtable = testutil::random_tensor(n, A, rng, -2.0, 2.0);
    const Tensor st = testutil::random_tensor(1, mc.state_width(), rng);

    int joints = 1;
    for (int i = 0; i < n; ++i) joints *= A;
    Tensor qrows = Tensor::zeros(joints, n);
    Tensor strows = Tensor::zeros(joints, mc.state_width());
    for (int j = 0; j < joints; ++j) {
      int code = j;
      for (int i = 0; i < n; ++i) {
        qrows.at(j, i) = qtable.at(i, code % A);
        code /= A;
      }
      for (int k = 0; k < mc.state_width(); ++k) strows.at(j, k) = st.at(0, k);
    }
    Graph g;
    const Tensor qtot = mixer::mix(g, m, g.constant(qrows), g.constant(strows)).val();
    int best = 0;
    for (int j = 1; j < joints; ++j)
      if (qtot.at(j, 0) > qtot.at(best, 0)) best = j;

    int greedy = 0, stride = 1;
    for (int i = 0; i < n; ++i) {
      greedy += stride * policy::argmax_row(qtable, i);
      stride *= A;
    }
    if (!(qtot.at(greedy, 0) >= qtot.at(best, 0) - 1e-12)) ++failures;
  }
  record(3, "mixer argmax agrees with per-agent argmax", failures == 0,
         std::to_string(kInstances - failures) + "/" + std::to_string(kInstances) +
             " parameterizations (n<=3, 5 actions, exhaustive joints)");
}

// ---- criterion 4: contrastive loss direction on a 2-peer toy ----

void criterion_contrastive() {
  constexpr int kInits = 50;
  constexpr int kSteps = 500;
  constexpr double kLr = 1e-2;
  int ok = 0, active = 0;

  for (int init = 0; init < kInits; ++init) {
    Rng rng = make_rng(8000 + init, "accept.c4");
    ModelConfig mc;
    mc.obs_width = 4;
    mc.n_agents = 3;
    mc.n_actions = 5;
    mc.hidden = 16;
    mc.mixer_h1 = 8;
    mc.mixer_h2 = 4;
    ComixModel m(mc, 8000 + init);

    // One receiver (agent 0) with two delivered peer messages; the peers'
    // own nets never act.
    StepData sd;
    sd.obs.assign(3, std::vector<double>(mc.obs_width, 0.0));
    for (auto& o : sd.obs)
      for (double& x : o) x = uniform(rng, -1.0, 1.0);
    sd.hidden_in.assign(3, Tensor::zeros(1, mc.hidden));
    Message own{0, sd.obs[0], uniform_int(rng, 0, 4), 0};
    Message p1{1, sd.obs[1], uniform_int(rng, 0, 4), 0};
    Message p2{2, sd.obs[2], uniform_int(rng, 0, 4), 0};
    sd.sent = {own};
    sd.delivered = {p1, p2};
    sd.soft_mask.assign(3, {});
    sd.actions.assign(3, 0);
    sd.rewards.assign(3, 0.0);
    sd.alive = {true, false, false};
    sd.q_self.assign(3, std::vector<double>(mc.n_actions, 0.0));

    // Frozen-Q value of each of the 4 masks via the production forward.
    auto mask_value = [&](bool a1, bool a2) {
      Graph g;
      auto core = policy::core_forward(g, m, 0, g.constant(Tensor::row(sd.obs[0])),
                                       g.constant(Tensor::zeros(1, mc.hidden)));
      Tensor rows = Tensor::zeros(2, mc.msg_width());
      const auto r1 = policy::message_row(p1, mc.n_actions);
      const auto r2 = policy::message_row(p2, mc.n_actions);
      for (int k = 0; k < mc.msg_width(); ++k) {
        rows.at(0, k) = r1[k];
        rows.at(1, k) = r2[k];
      }
      Value enc = policy::encode_messages(g, m, 0, rows, {1.0, 1.0});
      const int cnt = (a1 ? 1 : 0) + (a2 ? 1 : 0);
      Tensor sel = Tensor::zeros(1, 2);
      if (a1) sel.at(0, 0) = 1.0 / cnt;
      if (a2) sel.at(0, 1) = 1.0 / cnt;
      Value w = policy::coord_weights(g, m, 0, core.h_next,
                                      policy::aggregate_messages(g, enc, sel));
      const Tensor q = policy::q_combined(g, core.q_self, w).val();
      return q.at(0, policy::argmax_row(q, 0));
    };
    const double v[2][2] = {{mask_value(false, false), mask_value(false, true)},
                            {mask_value(true, false), mask_value(true, true)}};
    auto value_of = [&](bool a1, bool a2) { return v[a1 ? 1 : 0][a2 ? 1 : 0]; };

    auto probs_now = [&] {
      const coord::PairSeq pairs = coord::build_pairs(own, sd.delivered, mc.n_actions);
      const Tensor p = coord::coordinate_probs(m, 0, pairs);
      return std::pair<double, double>(p.at(0, 0), p.at(0, 1));
    };

    RmsProp opt(m.c_params, kLr, 0.0);
    auto one_step = [&] {
      const CoordPrep prep =
          prepare_coord_batch(m, mc, std::vector<const StepData*>{&sd}, false);
      Graph g;
      Value loss = coord_loss(g, m, prep);
      m.c_params.zero_grad();
      g.backward(loss);
      opt.step();
    };

    const auto [p1_0, p2_0] = probs_now();
    const bool b1 = coord::accept_bit(p1_0), b2 = coord::accept_bit(p2_0);
    const double gap0 = value_of(!b1, !b2) - value_of(b1, b2);

    one_step();
    const auto [p1_1, p2_1] = probs_now();
    bool first_ok;
    if (gap0 > 0.0) {
      ++active;
      // The complementary mask is better: every decision must move toward it.
      first_ok = (b1 ? p1_1 < p1_0 : p1_1 > p1_0) && (b2 ? p2_1 < p2_0 : p2_1 > p2_0);
    } else {
      first_ok = p1_1 == p1_0 && p2_1 == p2_0;  // zero gap, zero gradient
    }

    for (int s = 1; s < kSteps; ++s) one_step();
    const auto [p1_f, p2_f] = probs_now();
    const bool f1 = coord::accept_bit(p1_f), f2 = coord::accept_bit(p2_f);
    const bool settled = value_of(f1, f2) >= value_of(!f1, !f2) - 1e-12;

    if (first_ok && settled) ++ok;
  }
  record(4, "contrastive loss prefers the better message subset", ok >= 48,
         std::to_string(ok) + "/50 inits (need >=48; " + std::to_string(active) +
             " started with a positive gap; 500 steps, lr 1e-2)");
}

// ---- criterion 9: byte-identical reruns ----

ExperimentConfig micro_switch(const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::defaults_for(EnvKind::Switch);
  cfg.training.batch_size = 8;
  cfg.training.min_buffer = 40;
  cfg.training.max_buffer = 512;
  cfg.training.q_update_interval = 20;
  cfg.training.coord_update_interval = 20;
  cfg.training.target_update_interval = 400;
  cfg.training.episodes = 6;
  cfg.training.coord_fresh_window = 256;
  cfg.seeds = {1, 2};
  cfg.eval_episodes = 3;
  cfg.output_dir = out;
  return cfg;
}

void criterion_determinism(const std::string& root) {
  const std::string a = root + "/det_a", b = root + "/det_b";
  fs::remove_all(a);
  fs::remove_all(b);
  int rc = run_train(micro_switch(a), g_sink);
  rc |= run_train(micro_switch(b), g_sink);
  bool pass = rc == 0;
  std::string what = "exit codes clean";
  for (const char* rel : {"seed_1/metrics.jsonl", "seed_2/metrics.jsonl",
                          "seed_1/eval.jsonl", "train_report.jsonl"}) {
    const std::string fa = slurp(a + "/" + rel), fb = slurp(b + "/" + rel);
    if (fa.empty() || fa != fb) {
      pass = false;
      what = std::string(rel) + " differs between runs";
      break;
    }
  }
  if (pass) what = "metrics, eval and report files byte-identical across two runs";
  record(9, "determinism of (seed, config)", pass, what);
}

// ---- criterion 10: channel delivery statistics ----

void criterion_channel() {
  constexpr int kSteps = 100000;
  constexpr double kTol = 0.01;
  bool pass = true;
  std::ostringstream d;
  for (double usage : {0.5, 0.25, 0.10}) {
    ChannelConfig cc;
    cc.usage = usage;
    cc.seed = 99;
    const int n = 4, ow = 4;
    BroadcastChannel ch(cc, n, ow);
    ch.reset(424242);
    std::vector<Message> sent(n);
    for (int i = 0; i < n; ++i) sent[i] = Message{i, std::vector<double>(ow, 0.5), 1, 0};
    long delivered = 0;
    for (int s = 0; s < kSteps; ++s) {
      const auto got = ch.broadcast(sent);
      for (const Message& msg : got)
        if (msg.age == 0) ++delivered;
    }
    const double rate = static_cast<double>(delivered) / (static_cast<double>(kSteps) * n);
    const bool ok = std::fabs(rate - usage) <= kTol;
    pass = pass && ok;
    d << usage << "->" << rate << (ok ? " " : " (off) ");
  }
  record(10, "channel delivery rates within +/-0.01 of configured usage", pass,
         d.str() + "over 100k steps x 4 senders");
}

// ---- criterion 5: Switch desk-scale training ----

void criterion_switch(const std::string& root) {
  ExperimentConfig cfg = ExperimentConfig::defaults_for(EnvKind::Switch);
  cfg.output_dir = root + "/switch_default";
  if (!ensure_trained(cfg, "switch")) {
    record(5, "Switch default-config training", false, "training run failed");
    return;
  }
  std::vector<double> normalized;
  double worst_wall = 0.0;
  for (const std::string& line : file_lines(cfg.output_dir + "/train_report.jsonl")) {
    const ReportRecord r = report_from_json(line);
    normalized.push_back(r.normalized);
  }
  for (uint64_t s : cfg.seeds)
    worst_wall = std::max(worst_wall, last_elapsed_seconds(cfg.output_dir + "/seed_" +
                                                           std::to_string(s) + "/run.log"));
  int clears = 0;
  for (double nv : normalized)
    if (nv >= 0.85) ++clears;
  std::vector<double> sorted = normalized;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted.empty() ? 0.0 : sorted[sorted.size() / 2];
  const bool time_ok = worst_wall > 0.0 && worst_wall <= 7200.0;
  const bool pass = clears >= 3 && time_ok;
  std::ostringstream d;
  d << clears << "/5 seeds >= 0.85 (median " << median << "), slowest seed "
    << worst_wall << "s (budget 7200s)";
  record(5, "Switch training reaches 0.85 normalized reward", pass, d.str());
}

// ---- criterion 6: Predator-Prey vs no-communication ablation ----

ExperimentConfig pp_desk(const std::string& out, bool comm) {
  ExperimentConfig cfg = ExperimentConfig::defaults_for(EnvKind::PredatorPrey);
  cfg.training.batch_size = 64;
  cfg.training.episodes = 400;
  cfg.training.comm_enabled = comm;
  cfg.output_dir = out;
  return cfg;
}

void criterion_pp(const std::string& root) {
  ExperimentConfig comix_cfg = pp_desk(root + "/pp_comix", true);
  ExperimentConfig bare_cfg = pp_desk(root + "/pp_nocomm", false);
  if (!ensure_trained(comix_cfg, "predator-prey") ||
      !ensure_trained(bare_cfg, "predator-prey no-comm")) {
    record(6, "Predator-Prey beats the no-communication ablation", false,
           "training run failed");
    return;
  }
  auto seed_means = [](const ExperimentConfig& cfg) {
    std::vector<double> out;
    for (const std::string& line : file_lines(cfg.output_dir + "/train_report.jsonl"))
      out.push_back(report_from_json(line).mean_headline);
    return out;
  };
  const std::vector<double> with_comm = seed_means(comix_cfg);
  const std::vector<double> without = seed_means(bare_cfg);
  const double mc = mean_of(with_comm), mb = mean_of(without);
  const bool pass = with_comm.size() == comix_cfg.seeds.size() &&
                    without.size() == bare_cfg.seeds.size() && mc > mb;
  std::ostringstream d;
  d << "captures with comm " << mc << " vs without " << mb
    << " (5 seeds x 100 eval episodes; soft reference 10.85 +/- 20%)";
  record(6, "Predator-Prey beats the no-communication ablation", pass, d.str());
}

// ---- criterion 7: Transport disruption direction + fine-tuning ----

ExperimentConfig transport_desk(const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::defaults_for(EnvKind::Transport);
  cfg.training.batch_size = 256;
  cfg.training.episodes = 1000;
  cfg.output_dir = out;
  return cfg;
}

void criterion_transport(const std::string& root) {
  ExperimentConfig cfg = transport_desk(root + "/transport");
  if (!ensure_trained(cfg, "transport")) {
    record(7, "Transport disruption ordering and fine-tuning", false,
           "training run failed");
    return;
  }

  std::vector<double> full, cut, ft_before, ft_after;
  bool frozen_all = true, ran_ok = true;
  for (uint64_t seed : cfg.seeds) {
    const std::string ckpt =
        cfg.output_dir + "/seed_" + std::to_string(seed) + "/checkpoint_final.ckpt";
    CheckpointData cd = load_compatible_checkpoint(ckpt, cfg.env);
    auto tr = make_trainer(cfg, seed);
    tr->load(cd);
    EvalOptions eo;
    eo.episodes = 100;
    eo.seed = mix_seed(seed ^ fnv1a("accept.c7"));
    eo.channel = cfg.channel;
    eo.channel.usage = 1.0;
    full.push_back(tr->evaluate(eo).mean_headline);
    eo.channel.usage = 0.0;
    cut.push_back(tr->evaluate(eo).mean_headline);

    // Fine-tune against a 10%-usage channel; cached per seed by report shape.
    ExperimentConfig ft = cfg;
    ft.channel.usage = 0.10;
    ft.training.episodes = 300;
    ft.seeds = {seed};
    ft.output_dir = root + "/transport_ft_seed_" + std::to_string(seed);
    const std::string report = ft.output_dir + "/finetune_report.jsonl";
    bool cached = false;
    if (fs::exists(report) && fs::exists(ft.output_dir + "/config.ini")) {
      try {
        cached = ExperimentConfig::from_file(ft.output_dir + "/config.ini").hash() ==
                     ft.hash() &&
                 file_lines(report).size() == 3;
      } catch (const std::exception&) {
      }
    }
    if (!cached) {
      std::cerr << "[train] transport fine-tune seed " << seed << "\n";
      fs::remove_all(ft.output_dir);
      fs::create_directories(ft.output_dir);
      std::ofstream live(ft.output_dir + ".log", std::ios::trunc);
      if (run_finetune(ft, ckpt, live) != 0) {
        ran_ok = false;
        continue;
      }
      std::ofstream ini(ft.output_dir + "/config.ini", std::ios::trunc);
      ini << ft.canonical();
    }
    const auto lines = file_lines(report);
    if (lines.size() != 3) {
      ran_ok = false;
      continue;
    }
    const ReportRecord before = report_from_json(lines[1]);
    const ReportRecord after = report_from_json(lines[2]);
    ft_before.push_back(before.mean_headline);
    ft_after.push_back(after.mean_headline);
    frozen_all = frozen_all && after.coordinator_frozen;
  }

  const double m_full = mean_of(full), m_cut = mean_of(cut);
  const double m_before = mean_of(ft_before), m_after = mean_of(ft_after);
  const bool pass = ran_ok && frozen_all && full.size() == cfg.seeds.size() &&
                    m_cut < m_full && m_after >= m_before;
  std::ostringstream d;
  d << "completion at 0% usage " << m_cut << " < 100% " << m_full
    << "; fine-tuned at 10% " << m_after << " >= raw 10% " << m_before
    << (frozen_all ? " (coordinator frozen)" : " (coordinator MOVED)");
  record(7, "Transport disruption ordering and fine-tuning", pass, d.str());
}

// ---- criterion 2: mixer monotonicity at every saved checkpoint ----

void criterion_monotone(const std::string& root) {
  std::vector<std::string> ckpts;
  if (fs::exists(root))
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file() && e.path().extension() == ".ckpt")
        ckpts.push_back(e.path().string());
  std::sort(ckpts.begin(), ckpts.end());
  if (ckpts.empty()) {
    record(2, "mixer monotone in every agent's Q", false, "no saved checkpoints found");
    return;
  }
  constexpr int kDraws = 1000;
  constexpr double kStep = 1e-4;
  double worst = 1e9;
  bool pass = true;
  for (const std::string& path : ckpts) {
    const CheckpointData cd = load_checkpoint(path);
    ExperimentConfig cfg =
        ExperimentConfig::defaults_for(env_kind_from_name(cd.meta.env_kind));
    auto tr = make_trainer(cfg, cd.meta.seed);
    tr->load(cd);
    ComixModel& m = tr->model();
    const int n = m.cfg.n_agents;
    Rng rng = make_rng(fnv1a(path), "accept.c2");
    const Tensor q = testutil::random_tensor(kDraws, n, rng, -5.0, 5.0);
    const Tensor st = testutil::random_tensor(kDraws, m.cfg.state_width(), rng);
    for (int i = 0; i < n; ++i) {
      Tensor hi = q, lo = q;
      for (int b = 0; b < kDraws; ++b) {
        hi.at(b, i) += kStep;
        lo.at(b, i) -= kStep;
      }
      Graph g;
      const Tensor up = mixer::mix(g, m, g.constant(hi), g.constant(st)).val();
      const Tensor dn = mixer::mix(g, m, g.constant(lo), g.constant(st)).val();
      for (int b = 0; b < kDraws; ++b) {
        const double slope = (up.at(b, 0) - dn.at(b, 0)) / (2.0 * kStep);
        worst = std::min(worst, slope);
        pass = pass && slope >= -1e-9;
      }
    }
  }
  std::ostringstream d;
  d << ckpts.size() << " checkpoints x 1000 draws, worst dQtot/dQi slope " << worst
    << " (floor -1e-9)";
  record(2, "mixer monotone in every agent's Q", pass, d.str());
}

// ---- criterion 8: noisy-agent robustness on Predator-Prey ----

void criterion_noise(const std::string& root) {
  ExperimentConfig cfg = pp_desk(root + "/pp_comix", true);
  std::vector<double> clean, noisy;
  for (uint64_t seed : cfg.seeds) {
    const std::string ckpt =
        cfg.output_dir + "/seed_" + std::to_string(seed) + "/checkpoint_final.ckpt";
    if (!fs::exists(ckpt)) {
      record(8, "noisy agents barely move the accepted fraction", false,
             "missing trained checkpoint " + ckpt);
      return;
    }
    auto tr = make_trainer(cfg, seed);
    tr->load(load_compatible_checkpoint(ckpt, cfg.env));
    EvalOptions eo;
    eo.episodes = 50;
    eo.seed = mix_seed(seed ^ fnv1a("accept.c8"));
    eo.channel = cfg.channel;
    eo.channel.noisy_agents = 0;
    clean.push_back(tr->evaluate(eo).mean_accepted_fraction);
    eo.channel.noisy_agents = 4;
    noisy.push_back(tr->evaluate(eo).mean_accepted_fraction);
  }
  const double delta = std::fabs(mean_of(noisy) - mean_of(clean));
  const double spread = std_of(clean);
  const bool pass = delta < spread || (spread == 0.0 && delta == 0.0);
  std::ostringstream d;
  d << "accepted fraction clean " << mean_of(clean) << " vs 4 noisy agents "
    << mean_of(noisy) << "; |delta| " << delta << " < across-seed std " << spread;
  record(8, "noisy agents barely move the accepted fraction", pass, d.str());
}

}  // namespace

int main() {
  const std::string root = accept_dir();
  fs::create_directories(root);
  std::cerr << "acceptance artifacts: " << fs::absolute(root) << "\n";

  criterion_gradients();
  criterion_argmax();
  criterion_contrastive();
  criterion_determinism(root);
  criterion_channel();
  criterion_switch(root);
  criterion_pp(root);
  criterion_transport(root);
  criterion_monotone(root);  // consumes the checkpoints saved above
  criterion_noise(root);

  std::sort(g_results.begin(), g_results.end(),
            [](const Criterion& a, const Criterion& b) { return a.id < b.id; });
  int failures = 0;
  for (const Criterion& c : g_results) {
    std::cout << "criterion " << c.id << " [" << (c.pass ? "PASS" : "FAIL") << "] "
              << c.name << ": " << c.detail << "\n";
    if (!c.pass) ++failures;
  }
  std::cout << "acceptance: " << (g_results.size() - failures) << "/"
            << g_results.size() << " criteria passed\n";
  return failures == 0 ? 0 : 1;
}
