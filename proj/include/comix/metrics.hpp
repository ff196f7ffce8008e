#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "comix/trainer.hpp"

namespace comix {

// One line of the training metrics stream. Serialization is deterministic
// (sorted keys, shortest-round-trip doubles), so identical runs produce
// byte-identical files; wall-clock timing lives in the run log instead.
struct MetricsRecord {
  int episode = 0;
  uint64_t env_steps = 0;
  uint64_t seed = 0;
  std::vector<double> agent_returns;
  double team_return = 0.0;
  double normalized = 0.0;  // headline scaled to [0,1]
  double headline = 0.0;    // env-native success measure
  double epsilon = 0.0;
  double td_loss = std::nan("");
  double coord_loss = std::nan("");
  double accepted_fraction = std::nan("");
  int steps = 0;
};

MetricsRecord make_metrics_record(const EpisodeStats& st, uint64_t seed,
                                  const EnvConfig& ec);
std::string metrics_to_json(const MetricsRecord& r);
MetricsRecord metrics_from_json(const std::string& line);

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void write(const MetricsRecord& r);  // appends one line and flushes

 private:
  std::ofstream out_;
};

std::vector<MetricsRecord> read_metrics_file(const std::string& path);

// Curve smoothing used by report endpoints: centered value of a trailing
// rolling-mean window, or an exponential moving average.
std::vector<double> rolling_mean(const std::vector<double>& xs, int window);
std::vector<double> ema(const std::vector<double>& xs, double smoothing);

// Headline scaled to [0,1] for the env (Switch already is; Transport is a
// percentage; Predator-Prey counts prey).
double normalized_headline(double headline, const EnvConfig& ec);

}  // namespace comix
