#include "comix/config.hpp"

#include <cctype>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "comix/errors.hpp"
#include "comix/rng.hpp"

namespace comix {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

struct Entry {
  std::string section, key, value;
  int line = 0;
};

std::vector<Entry> parse_ini(const std::string& text) {
  std::vector<Entry> out;
  std::istringstream in(text);
  std::string line, section;
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    const size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(ln) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("config line " + std::to_string(ln) + ": empty section name");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(ln) + ": expected key = value");
    Entry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = ln;
    if (e.section.empty())
      throw ConfigError("config line " + std::to_string(ln) + ": key outside any [section]");
    if (e.key.empty())
      throw ConfigError("config line " + std::to_string(ln) + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

[[noreturn]] void bad_value(const Entry& e, const std::string& why) {
  throw ConfigError("config line " + std::to_string(e.line) + ": [" + e.section + "] " +
                    e.key + " = '" + e.value + "': " + why);
}

double to_double(const Entry& e) {
  try {
    size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) bad_value(e, "trailing characters after number");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(e, "not a number");
  }
}

int to_int(const Entry& e) {
  try {
    size_t pos = 0;
    const long v = std::stol(e.value, &pos);
    if (pos != e.value.size()) bad_value(e, "trailing characters after integer");
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
      bad_value(e, "integer out of range");
    return static_cast<int>(v);
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(e, "not an integer");
  }
}

uint64_t to_u64(const Entry& e, const std::string& token) {
  try {
    size_t pos = 0;
    const unsigned long long v = std::stoull(token, &pos);
    if (pos != token.size()) bad_value(e, "bad seed '" + token + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(e, "bad seed '" + token + "'");
  }
}

bool to_bool(const Entry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  bad_value(e, "expected true/false");
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

void apply_env(ExperimentConfig& c, const Entry& e) {
  const std::string& k = e.key;
  if (k == "kind") return;  // consumed in the pre-scan
  if (k == "width") c.env.width = to_int(e);
  else if (k == "height") c.env.height = to_int(e);
  else if (k == "agents") c.env.n_agents = to_int(e);
  else if (k == "entities") c.env.n_entities = to_int(e);
  else if (k == "obs_width") c.env.obs_width = to_int(e);
  else if (k == "actions") c.env.n_actions = to_int(e);
  else if (k == "step_reward") c.env.step_reward = to_double(e);
  else if (k == "intermediary_reward") c.env.intermediary_reward = to_double(e);
  else if (k == "goal_reward") c.env.goal_reward = to_double(e);
  else if (k == "obstacle_fraction") c.env.obstacle_fraction = to_double(e);
  else if (k == "step_limit") c.env.step_limit = to_int(e);
  else bad_value(e, "unknown key in [env]");
}

void apply_training(ExperimentConfig& c, const Entry& e) {
  const std::string& k = e.key;
  TrainConfig& t = c.training;
  if (k == "gamma") t.gamma = to_double(e);
  else if (k == "batch_size") t.batch_size = to_int(e);
  else if (k == "recurrent_steps") t.recurrent_steps = to_int(e);
  else if (k == "q_update_interval") t.q_update_interval = to_int(e);
  else if (k == "coord_update_interval") t.coord_update_interval = to_int(e);
  else if (k == "target_update_interval") t.target_update_interval = to_int(e);
  else if (k == "target_update_episodes") t.target_update_episodes = to_int(e);
  else if (k == "q_lr") t.q_lr = to_double(e);
  else if (k == "coord_lr") t.coord_lr = to_double(e);
  else if (k == "weight_decay") t.weight_decay = to_double(e);
  else if (k == "beta1") t.beta1 = to_double(e);
  else if (k == "smoothing") t.smoothing = to_double(e);
  else if (k == "min_buffer") t.min_buffer = to_int(e);
  else if (k == "max_buffer") t.max_buffer = to_int(e);
  else if (k == "episodes") t.episodes = to_int(e);
  else if (k == "eps_start") t.eps_start = to_double(e);
  else if (k == "eps_final") t.eps_final = to_double(e);
  else if (k == "eps_anneal_fraction") t.eps_anneal_fraction = to_double(e);
  else if (k == "seed") t.seed = to_u64(e, e.value);
  else if (k == "comm") t.comm_enabled = to_bool(e);
  else if (k == "finetune") t.finetune = to_bool(e);
  else if (k == "coord_fresh_window") t.coord_fresh_window = to_int(e);
  else bad_value(e, "unknown key in [training]");
}

void apply_channel(ExperimentConfig& c, const Entry& e) {
  const std::string& k = e.key;
  if (k == "usage") c.channel.usage = to_double(e);
  else if (k == "burst_mean") c.channel.burst_mean = to_double(e);
  else if (k == "noisy_agents") c.channel.noisy_agents = to_int(e);
  else if (k == "delay_scaling") c.channel.delay_scaling = to_bool(e);
  else if (k == "seed") c.channel.seed = to_u64(e, e.value);
  else bad_value(e, "unknown key in [channel]");
}

void apply_output(ExperimentConfig& c, const Entry& e) {
  const std::string& k = e.key;
  if (k == "dir") {
    c.output_dir = e.value;
  } else if (k == "seeds") {
    c.seeds.clear();
    std::istringstream in(e.value);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) c.seeds.push_back(to_u64(e, tok));
    }
    if (c.seeds.empty()) bad_value(e, "seed list is empty");
  } else if (k == "eval_episodes") {
    c.eval_episodes = to_int(e);
  } else if (k == "checkpoint_interval") {
    c.checkpoint_interval = to_int(e);
  } else {
    bad_value(e, "unknown key in [output]");
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults_for(EnvKind k) {
  ExperimentConfig c;
  switch (k) {
    case EnvKind::Switch: c.env = EnvConfig::switch_default(); break;
    case EnvKind::Transport: c.env = EnvConfig::transport_default(); break;
    case EnvKind::PredatorPrey: c.env = EnvConfig::predator_prey_default(); break;
  }
  c.training = TrainConfig::defaults_for(k);
  return c;
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
  const std::vector<Entry> entries = parse_ini(text);
  EnvKind kind = EnvKind::Switch;
  for (const Entry& e : entries) {
    if (e.section == "env" && e.key == "kind") {
      try {
        kind = env_kind_from_name(e.value);
      } catch (const std::exception& ex) {
        bad_value(e, ex.what());
      }
    }
  }
  ExperimentConfig c = defaults_for(kind);
  for (const Entry& e : entries) {
    if (e.section == "env") apply_env(c, e);
    else if (e.section == "training") apply_training(c, e);
    else if (e.section == "channel") apply_channel(c, e);
    else if (e.section == "output") apply_output(c, e);
    else throw ConfigError("config line " + std::to_string(e.line) + ": unknown section [" +
                           e.section + "]");
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

void ExperimentConfig::validate() const {
  env.validate();
  training.validate();
  channel.validate();
  if (output_dir.empty()) throw ConfigError("[output] dir must not be empty");
  if (seeds.empty()) throw ConfigError("[output] seeds must not be empty");
  if (eval_episodes <= 0) throw ConfigError("[output] eval_episodes must be positive");
  if (checkpoint_interval < 0)
    throw ConfigError("[output] checkpoint_interval must be non-negative");
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream o;
  o << "[env]\n";
  o << "kind = " << env_kind_name(env.kind) << "\n";
  o << "width = " << env.width << "\n";
  o << "height = " << env.height << "\n";
  o << "agents = " << env.n_agents << "\n";
  o << "entities = " << env.n_entities << "\n";
  o << "obs_width = " << env.obs_width << "\n";
  o << "actions = " << env.n_actions << "\n";
  o << "step_reward = " << fmt(env.step_reward) << "\n";
  o << "intermediary_reward = " << fmt(env.intermediary_reward) << "\n";
  o << "goal_reward = " << fmt(env.goal_reward) << "\n";
  o << "obstacle_fraction = " << fmt(env.obstacle_fraction) << "\n";
  o << "step_limit = " << env.step_limit << "\n";
  o << "\n[training]\n";
  o << "gamma = " << fmt(training.gamma) << "\n";
  o << "batch_size = " << training.batch_size << "\n";
  o << "recurrent_steps = " << training.recurrent_steps << "\n";
  o << "q_update_interval = " << training.q_update_interval << "\n";
  o << "coord_update_interval = " << training.coord_update_interval << "\n";
  o << "target_update_interval = " << training.target_update_interval << "\n";
  o << "target_update_episodes = " << training.target_update_episodes << "\n";
  o << "q_lr = " << fmt(training.q_lr) << "\n";
  o << "coord_lr = " << fmt(training.coord_lr) << "\n";
  o << "weight_decay = " << fmt(training.weight_decay) << "\n";
  o << "beta1 = " << fmt(training.beta1) << "\n";
  o << "smoothing = " << fmt(training.smoothing) << "\n";
  o << "min_buffer = " << training.min_buffer << "\n";
  o << "max_buffer = " << training.max_buffer << "\n";
  o << "episodes = " << training.episodes << "\n";
  o << "eps_start = " << fmt(training.eps_start) << "\n";
  o << "eps_final = " << fmt(training.eps_final) << "\n";
  o << "eps_anneal_fraction = " << fmt(training.eps_anneal_fraction) << "\n";
  o << "seed = " << training.seed << "\n";
  o << "comm = " << (training.comm_enabled ? "true" : "false") << "\n";
  o << "finetune = " << (training.finetune ? "true" : "false") << "\n";
  o << "coord_fresh_window = " << training.coord_fresh_window << "\n";
  o << "\n[channel]\n";
  o << "usage = " << fmt(channel.usage) << "\n";
  o << "burst_mean = " << fmt(channel.burst_mean) << "\n";
  o << "noisy_agents = " << channel.noisy_agents << "\n";
  o << "delay_scaling = " << (channel.delay_scaling ? "true" : "false") << "\n";
  o << "seed = " << channel.seed << "\n";
  o << "\n[output]\n";
  o << "dir = " << output_dir << "\n";
  o << "seeds = ";
  for (size_t i = 0; i < seeds.size(); ++i) o << (i ? "," : "") << seeds[i];
  o << "\n";
  o << "eval_episodes = " << eval_episodes << "\n";
  o << "checkpoint_interval = " << checkpoint_interval << "\n";
  return o.str();
}

std::string ExperimentConfig::hash() const {
  const uint64_t h = fnv1a(canonical());
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << h;
  return o.str();
}

}  // namespace comix
