#include "comix/metrics.hpp"

#include <json.hpp>

#include "comix/errors.hpp"

namespace comix {

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

}  // namespace

double normalized_headline(double headline, const EnvConfig& ec) {
  switch (ec.kind) {
    case EnvKind::Switch: return headline;
    case EnvKind::Transport: return headline / 100.0;
    case EnvKind::PredatorPrey:
      return ec.n_entities > 0 ? headline / ec.n_entities : headline;
  }
  return headline;
}

MetricsRecord make_metrics_record(const EpisodeStats& st, uint64_t seed,
                                  const EnvConfig& ec) {
  MetricsRecord r;
  r.episode = st.episode;
  r.env_steps = st.env_steps;
  r.seed = seed;
  r.agent_returns = st.agent_returns;
  r.team_return = st.team_return;
  r.headline = st.headline;
  r.normalized = normalized_headline(st.headline, ec);
  r.epsilon = st.epsilon;
  r.td_loss = st.td_loss;
  r.coord_loss = st.coord_loss;
  r.accepted_fraction = st.accepted_fraction;
  r.steps = st.steps;
  return r;
}

std::string metrics_to_json(const MetricsRecord& r) {
  json j;
  j["episode"] = r.episode;
  j["env_steps"] = r.env_steps;
  j["seed"] = r.seed;
  j["agent_returns"] = r.agent_returns;
  j["team_return"] = num_or_null(r.team_return);
  j["normalized"] = num_or_null(r.normalized);
  j["headline"] = num_or_null(r.headline);
  j["epsilon"] = num_or_null(r.epsilon);
  j["td_loss"] = num_or_null(r.td_loss);
  j["coord_loss"] = num_or_null(r.coord_loss);
  j["accepted_fraction"] = num_or_null(r.accepted_fraction);
  j["steps"] = r.steps;
  return j.dump();
}

MetricsRecord metrics_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("bad metrics line: ") + ex.what());
  }
  MetricsRecord r;
  r.episode = j.at("episode").get<int>();
  r.env_steps = j.at("env_steps").get<uint64_t>();
  r.seed = j.at("seed").get<uint64_t>();
  r.agent_returns = j.at("agent_returns").get<std::vector<double>>();
  r.team_return = null_or_num(j.at("team_return"));
  r.normalized = null_or_num(j.at("normalized"));
  r.headline = null_or_num(j.at("headline"));
  r.epsilon = null_or_num(j.at("epsilon"));
  r.td_loss = null_or_num(j.at("td_loss"));
  r.coord_loss = null_or_num(j.at("coord_loss"));
  r.accepted_fraction = null_or_num(j.at("accepted_fraction"));
  r.steps = j.at("steps").get<int>();
  return r;
}

MetricsWriter::MetricsWriter(const std::string& path) : out_(path, std::ios::trunc) {
  if (!out_) throw ConfigError("cannot open metrics file for writing: " + path);
}

void MetricsWriter::write(const MetricsRecord& r) {
  out_ << metrics_to_json(r) << "\n";
  out_.flush();
}

std::vector<MetricsRecord> read_metrics_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics file: " + path);
  std::vector<MetricsRecord> out;
  std::string line;
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    try {
      out.push_back(metrics_from_json(line));
    } catch (const ConfigError&) {
      // A torn final line is expected after an abrupt kill mid-write;
      // anything earlier is real corruption.
      if (in.peek() == std::ifstream::traits_type::eof()) break;
      throw ConfigError(path + " line " + std::to_string(ln) + ": unparseable record");
    }
  }
  return out;
}

std::vector<double> rolling_mean(const std::vector<double>& xs, int window) {
  if (window <= 0) throw ContractViolation("rolling window must be positive");
  std::vector<double> out;
  out.reserve(xs.size());
  double acc = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    acc += xs[i];
    if (i >= static_cast<size_t>(window)) acc -= xs[i - window];
    const size_t n = std::min(i + 1, static_cast<size_t>(window));
    out.push_back(acc / n);
  }
  return out;
}

std::vector<double> ema(const std::vector<double>& xs, double smoothing) {
  if (smoothing < 0.0 || smoothing >= 1.0)
    throw ContractViolation("EMA smoothing must lie in [0,1)");
  std::vector<double> out;
  out.reserve(xs.size());
  double acc = 0.0;
  bool first = true;
  for (double x : xs) {
    acc = first ? x : smoothing * acc + (1.0 - smoothing) * x;
    first = false;
    out.push_back(acc);
  }
  return out;
}

}  // namespace comix
