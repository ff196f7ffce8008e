#include "comix/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "comix/checkpoint.hpp"
#include "comix/rng.hpp"

namespace comix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json num_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double null_or_num(const json& j) {
  if (j.is_null()) return std::nan("");
  return j.get<double>();
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    auto now = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(now - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path);
  out << body;
}

void append_line(const std::string& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw ConfigError("cannot write " + path);
  out << line << "\n";
}

std::string seed_dir(const ExperimentConfig& cfg, uint64_t seed) {
  return cfg.output_dir + "/seed_" + std::to_string(seed);
}

EvalOptions eval_options(const ExperimentConfig& cfg, uint64_t seed) {
  EvalOptions eo;
  eo.episodes = cfg.eval_episodes;
  eo.seed = mix_seed(seed ^ fnv1a("harness.eval"));
  eo.channel = cfg.channel;
  eo.channel.seed = 0;  // derived from eo.seed inside evaluate()
  eo.comm = cfg.training.comm_enabled;
  eo.delay_scaling = cfg.channel.delay_scaling;
  return eo;
}

ReportRecord summarize(const std::string& phase, uint64_t seed,
                       const ExperimentConfig& cfg, const EvalResult& er) {
  ReportRecord r;
  r.phase = phase;
  r.seed = seed;
  r.usage = cfg.channel.usage;
  r.noisy_agents = cfg.channel.noisy_agents;
  r.episodes = static_cast<int>(er.headline.size());
  r.mean_headline = er.mean_headline;
  r.std_headline = er.std_headline;
  r.mean_team_return = er.mean_team_return;
  r.normalized = normalized_headline(er.mean_headline, cfg.env);
  r.accepted_fraction = er.mean_accepted_fraction;
  return r;
}

void print_report(std::ostream& log, const ReportRecord& r) {
  log << std::left << std::setw(22) << r.phase << " seed " << std::setw(6) << r.seed
      << " usage " << std::setw(5) << r.usage << " noisy " << r.noisy_agents
      << "  headline " << std::fixed << std::setprecision(3) << r.mean_headline
      << " +/- " << r.std_headline << "  team " << r.mean_team_return;
  if (std::isfinite(r.accepted_fraction)) log << "  accept " << r.accepted_fraction;
  log << std::defaultfloat << std::setprecision(6) << "\n";
}

}  // namespace

std::string report_to_json(const ReportRecord& r) {
  json j;
  j["phase"] = r.phase;
  j["seed"] = r.seed;
  j["usage"] = r.usage;
  j["noisy_agents"] = r.noisy_agents;
  j["episodes"] = r.episodes;
  j["mean_headline"] = num_or_null(r.mean_headline);
  j["std_headline"] = num_or_null(r.std_headline);
  j["mean_team_return"] = num_or_null(r.mean_team_return);
  j["normalized"] = num_or_null(r.normalized);
  j["accepted_fraction"] = num_or_null(r.accepted_fraction);
  j["coordinator_frozen"] = r.coordinator_frozen;
  return j.dump();
}

ReportRecord report_from_json(const std::string& line) {
  json j = json::parse(line);
  ReportRecord r;
  r.phase = j.at("phase").get<std::string>();
  r.seed = j.at("seed").get<uint64_t>();
  r.usage = j.at("usage").get<double>();
  r.noisy_agents = j.at("noisy_agents").get<int>();
  r.episodes = j.at("episodes").get<int>();
  r.mean_headline = null_or_num(j.at("mean_headline"));
  r.std_headline = null_or_num(j.at("std_headline"));
  r.mean_team_return = null_or_num(j.at("mean_team_return"));
  r.normalized = null_or_num(j.at("normalized"));
  r.accepted_fraction = null_or_num(j.at("accepted_fraction"));
  r.coordinator_frozen = j.at("coordinator_frozen").get<bool>();
  return r;
}

std::string trace_to_json(const MaskTraceRecord& t) {
  json j;
  j["episode"] = t.episode;
  j["step"] = t.step;
  j["agent"] = t.agent;
  j["senders"] = t.senders;
  j["probs"] = t.probs;
  j["bits"] = t.bits;
  return j.dump();
}

MaskTraceRecord trace_from_json(const std::string& line) {
  json j = json::parse(line);
  MaskTraceRecord t;
  t.episode = j.at("episode").get<int>();
  t.step = j.at("step").get<int>();
  t.agent = j.at("agent").get<int>();
  t.senders = j.at("senders").get<std::vector<int>>();
  t.probs = j.at("probs").get<std::vector<double>>();
  t.bits = j.at("bits").get<std::vector<int>>();
  return t;
}

std::string channel_event_to_json(const BroadcastChannel::Event& e) {
  json j;
  j["step"] = e.step;
  j["sender"] = e.sender;
  j["delivered"] = e.delivered;
  j["age"] = e.age;
  return j.dump();
}

BroadcastChannel::Event channel_event_from_json(const std::string& line) {
  json j = json::parse(line);
  BroadcastChannel::Event e;
  e.step = j.at("step").get<int>();
  e.sender = j.at("sender").get<int>();
  e.delivered = j.at("delivered").get<bool>();
  e.age = j.at("age").get<int>();
  return e;
}

uint64_t params_hash(const nn::ParamStore& ps) {
  uint64_t h = 1469598103934665603ull;
  for (const auto& p : ps.all()) {
    h ^= fnv1a(p.name);
    h *= 1099511628211ull;
    for (double v : p.value.v) {
      uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h ^= bits;
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::unique_ptr<Trainer> make_trainer(const ExperimentConfig& cfg, uint64_t seed) {
  TrainConfig tc = cfg.training;
  tc.seed = seed;
  auto tr = std::make_unique<Trainer>(cfg.env, tc, cfg.channel);
  tr->set_config_hash(cfg.hash());
  return tr;
}

CheckpointData load_compatible_checkpoint(const std::string& path, const EnvConfig& env) {
  CheckpointData cd = load_checkpoint(path);
  std::ostringstream why;
  if (cd.meta.env_kind != env_kind_name(env.kind))
    why << "env kind '" << cd.meta.env_kind << "' != configured '"
        << env_kind_name(env.kind) << "'";
  else if (cd.meta.n_agents != static_cast<uint32_t>(env.n_agents))
    why << "agent count " << cd.meta.n_agents << " != configured " << env.n_agents;
  else if (cd.meta.obs_width != static_cast<uint32_t>(env.obs_width))
    why << "observation width " << cd.meta.obs_width << " != configured "
        << env.obs_width;
  if (!why.str().empty())
    throw ConfigError("checkpoint " + path + " is incompatible: " + why.str());
  return cd;
}

int run_train(const ExperimentConfig& cfg, std::ostream& log) {
  fs::create_directories(cfg.output_dir);
  write_text_file(cfg.output_dir + "/config.ini", cfg.canonical());
  const std::string report_path = cfg.output_dir + "/train_report.jsonl";
  std::ofstream(report_path, std::ios::trunc);

  std::vector<double> final_means;
  for (uint64_t seed : cfg.seeds) {
    const std::string dir = seed_dir(cfg, seed);
    fs::create_directories(dir);
    auto tr = make_trainer(cfg, seed);
    MetricsWriter mw(dir + "/metrics.jsonl");
    std::ofstream runlog(dir + "/run.log", std::ios::trunc);
    WallClock clock;
    runlog << "seed " << seed << " config " << cfg.hash() << " episodes "
           << tr->train_config().episodes << "\n";
    runlog.flush();
    log << "train seed " << seed << ": " << tr->train_config().episodes
        << " episodes\n";
    log.flush();

    const int progress_every = std::max(1, tr->train_config().episodes / 20);
    bool crashed = false;
    try {
      tr->train([&](const EpisodeStats& st) {
        mw.write(make_metrics_record(st, seed, cfg.env));
        if ((st.episode + 1) % progress_every == 0 ||
            st.episode + 1 == tr->train_config().episodes) {
          runlog << "episode " << st.episode + 1 << " env_steps " << st.env_steps
                 << " headline " << st.headline << " elapsed_s " << std::fixed
                 << std::setprecision(1) << clock.seconds() << std::defaultfloat
                 << std::setprecision(6) << "\n";
          runlog.flush();
        }
        if (cfg.checkpoint_interval > 0 &&
            (st.episode + 1) % cfg.checkpoint_interval == 0)
          save_checkpoint(dir + "/checkpoint_ep" + std::to_string(st.episode + 1) +
                              ".ckpt",
                          tr->make_checkpoint());
        return true;
      });
    } catch (const NumericError& ex) {
      save_checkpoint(dir + "/crash.ckpt", tr->make_checkpoint());
      runlog << "halt: " << ex.what() << " (state saved to crash.ckpt)\n";
      log << "seed " << seed << " halted on numeric failure: " << ex.what()
          << "; state saved to " << dir << "/crash.ckpt\n";
      crashed = true;
    }
    if (crashed) return 3;

    save_checkpoint(dir + "/checkpoint_final.ckpt", tr->make_checkpoint());
    EvalResult er = tr->evaluate(eval_options(cfg, seed));
    ReportRecord rec = summarize("train.final_eval", seed, cfg, er);
    append_line(report_path, report_to_json(rec));
    append_line(dir + "/eval.jsonl", report_to_json(rec));
    print_report(log, rec);
    runlog << "done: eval headline " << er.mean_headline << " elapsed_s "
           << std::fixed << std::setprecision(1) << clock.seconds()
           << std::defaultfloat << std::setprecision(6) << "\n";
    final_means.push_back(er.mean_headline);
  }

  std::vector<double> sorted = final_means;
  std::sort(sorted.begin(), sorted.end());
  double median = sorted.empty() ? 0.0 : sorted[sorted.size() / 2];
  log << "train complete: median final headline " << median << " over "
      << final_means.size() << " seeds\n";
  return 0;
}

int run_eval(const ExperimentConfig& cfg, const std::string& checkpoint, int episodes,
             std::ostream& log) {
  CheckpointData cd = load_compatible_checkpoint(checkpoint, cfg.env);
  fs::create_directories(cfg.output_dir);
  const std::string report_path = cfg.output_dir + "/eval_report.jsonl";
  std::ofstream(report_path, std::ios::trunc);

  std::vector<double> means;
  for (uint64_t seed : cfg.seeds) {
    auto tr = make_trainer(cfg, seed);
    tr->load(cd);
    EvalOptions eo = eval_options(cfg, seed);
    if (episodes > 0) eo.episodes = episodes;
    EvalResult er = tr->evaluate(eo);
    ReportRecord rec = summarize("eval", seed, cfg, er);
    append_line(report_path, report_to_json(rec));
    print_report(log, rec);
    means.push_back(er.mean_headline);
  }
  log << "eval: headline " << mean_of(means) << " +/- " << std_of(means) << " across "
      << means.size() << " seeds\n";
  return 0;
}

int run_disrupt(const ExperimentConfig& cfg, const std::string& checkpoint,
                std::ostream& log) {
  CheckpointData cd = load_compatible_checkpoint(checkpoint, cfg.env);
  fs::create_directories(cfg.output_dir);
  const std::string report_path = cfg.output_dir + "/disrupt_report.jsonl";
  std::ofstream(report_path, std::ios::trunc);

  const std::vector<double> usages = {1.0, 0.5, 0.25, 0.10, 0.0};
  log << std::left << std::setw(8) << "usage" << std::setw(12) << "headline"
      << std::setw(12) << "std" << "team\n";
  for (double usage : usages) {
    ExperimentConfig level = cfg;
    level.channel.usage = usage;
    std::vector<double> means, teams;
    for (uint64_t seed : cfg.seeds) {
      auto tr = make_trainer(level, seed);
      tr->load(cd);
      EvalResult er = tr->evaluate(eval_options(level, seed));
      ReportRecord rec = summarize("disrupt", seed, level, er);
      append_line(report_path, report_to_json(rec));
      means.push_back(er.mean_headline);
      teams.push_back(er.mean_team_return);
    }
    log << std::left << std::setw(8) << usage << std::fixed << std::setprecision(3)
        << std::setw(12) << mean_of(means) << std::setw(12) << std_of(means)
        << mean_of(teams) << std::defaultfloat << std::setprecision(6) << "\n";
  }
  return 0;
}

int run_comm_analysis(const ExperimentConfig& cfg, const std::string& checkpoint,
                      const std::vector<int>& noisy_counts, std::ostream& log) {
  CheckpointData cd = load_compatible_checkpoint(checkpoint, cfg.env);
  fs::create_directories(cfg.output_dir);
  const std::string report_path = cfg.output_dir + "/comm_report.jsonl";
  std::ofstream(report_path, std::ios::trunc);

  log << std::left << std::setw(8) << "noisy" << std::setw(12) << "accept"
      << std::setw(12) << "std" << "headline\n";
  for (int noisy : noisy_counts) {
    ExperimentConfig level = cfg;
    level.channel.noisy_agents = noisy;
    std::vector<double> fracs, means;
    for (size_t si = 0; si < cfg.seeds.size(); ++si) {
      uint64_t seed = cfg.seeds[si];
      auto tr = make_trainer(level, seed);
      tr->load(cd);
      EvalOptions eo = eval_options(level, seed);
      eo.collect_traces = si == 0;
      eo.log_channel_events = si == 0;
      EvalResult er = tr->evaluate(eo);
      ReportRecord rec = summarize("comm", seed, level, er);
      append_line(report_path, report_to_json(rec));
      fracs.push_back(er.mean_accepted_fraction);
      means.push_back(er.mean_headline);
      if (si == 0) {
        const std::string suffix = "_noisy" + std::to_string(noisy) + ".jsonl";
        std::ofstream traces(cfg.output_dir + "/mask_traces" + suffix,
                             std::ios::trunc);
        for (const auto& t : er.traces) traces << trace_to_json(t) << "\n";
        std::ofstream events(cfg.output_dir + "/channel_events" + suffix,
                             std::ios::trunc);
        for (const auto& e : er.channel_events)
          events << channel_event_to_json(e) << "\n";
      }
    }
    log << std::left << std::setw(8) << noisy << std::fixed << std::setprecision(3)
        << std::setw(12) << mean_of(fracs) << std::setw(12) << std_of(fracs)
        << mean_of(means) << std::defaultfloat << std::setprecision(6) << "\n";
  }
  return 0;
}

int run_finetune(const ExperimentConfig& cfg, const std::string& checkpoint,
                 std::ostream& log) {
  CheckpointData cd = load_compatible_checkpoint(checkpoint, cfg.env);
  fs::create_directories(cfg.output_dir);
  const std::string report_path = cfg.output_dir + "/finetune_report.jsonl";
  std::ofstream(report_path, std::ios::trunc);
  uint64_t seed = cfg.seeds.empty() ? 1 : cfg.seeds[0];

  // Reference score: the loaded policy on a clean full-usage channel.
  ExperimentConfig clean = cfg;
  clean.channel = ChannelConfig{};
  clean.channel.delay_scaling = false;
  auto base = make_trainer(clean, seed);
  base->load(cd);
  EvalResult baseline = base->evaluate(eval_options(clean, seed));
  ReportRecord base_rec = summarize("finetune.baseline", seed, clean, baseline);
  append_line(report_path, report_to_json(base_rec));
  print_report(log, base_rec);

  // Degraded channel; stale messages are attenuated by age during adaptation.
  ExperimentConfig faulty = cfg;
  faulty.channel.delay_scaling = true;
  faulty.training.finetune = true;
  faulty.training.comm_enabled = true;
  faulty.training.q_lr = cfg.training.q_lr / 100.0;
  EvalResult before = [&] {
    auto probe = make_trainer(faulty, seed);
    probe->load(cd);
    return probe->evaluate(eval_options(faulty, seed));
  }();
  ReportRecord before_rec = summarize("finetune.before", seed, faulty, before);
  append_line(report_path, report_to_json(before_rec));
  print_report(log, before_rec);

  auto tr = make_trainer(faulty, seed);
  tr->load(cd);
  const uint64_t coord_hash_before = params_hash(tr->model().c_params);

  const double target = baseline.mean_headline * 0.99;
  const int budget = faulty.training.episodes;
  const int eval_every = std::max(1, budget / 25);
  MetricsWriter mw(cfg.output_dir + "/finetune_metrics.jsonl");
  std::ofstream runlog(cfg.output_dir + "/finetune_run.log", std::ios::trunc);
  WallClock clock;

  double best_mean = before.mean_headline;
  CheckpointData best = tr->make_checkpoint();
  bool reached = best_mean >= target;
  try {
    tr->train([&](const EpisodeStats& st) {
      mw.write(make_metrics_record(st, seed, cfg.env));
      if ((st.episode + 1) % eval_every != 0) return true;
      EvalResult er = tr->evaluate(eval_options(faulty, seed));
      runlog << "episode " << st.episode + 1 << " headline " << er.mean_headline
             << " target " << target << " elapsed_s " << std::fixed
             << std::setprecision(1) << clock.seconds() << std::defaultfloat
             << std::setprecision(6) << "\n";
      runlog.flush();
      if (er.mean_headline > best_mean) {
        best_mean = er.mean_headline;
        best = tr->make_checkpoint();
      }
      if (er.mean_headline >= target) {
        reached = true;
        return false;
      }
      return true;
    });
  } catch (const NumericError& ex) {
    save_checkpoint(cfg.output_dir + "/crash.ckpt", tr->make_checkpoint());
    log << "fine-tune halted on numeric failure: " << ex.what()
        << "; state saved to " << cfg.output_dir << "/crash.ckpt\n";
    return 3;
  }

  const bool frozen = params_hash(tr->model().c_params) == coord_hash_before;
  save_checkpoint(cfg.output_dir + "/finetuned.ckpt", best);

  EvalResult after = [&] {
    auto probe = make_trainer(faulty, seed);
    probe->load(best);
    return probe->evaluate(eval_options(faulty, seed));
  }();
  ReportRecord after_rec = summarize("finetune.after", seed, faulty, after);
  after_rec.coordinator_frozen = frozen;
  append_line(report_path, report_to_json(after_rec));
  print_report(log, after_rec);

  log << "fine-tune " << (reached ? "reached" : "did NOT reach") << " target "
      << target << " (best " << best_mean << "); coordinator "
      << (frozen ? "unchanged" : "CHANGED") << "\n";
  if (!frozen) {
    log << "error: coordinator parameters moved during fine-tune\n";
    return 4;
  }
  if (!reached)
    log << "warning: budget of " << budget
        << " episodes exhausted before matching the reference score\n";
  return 0;
}

}  // namespace comix
