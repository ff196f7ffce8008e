#pragma once

#include <cmath>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "comix/config.hpp"
#include "comix/metrics.hpp"

namespace comix {

// One line of a report file (eval/disrupt/comm-analysis/finetune). The
// schema is shared across commands so every report parses the same way.
struct ReportRecord {
  std::string phase;
  uint64_t seed = 0;
  double usage = 1.0;
  int noisy_agents = 0;
  int episodes = 0;
  double mean_headline = 0.0;
  double std_headline = 0.0;
  double mean_team_return = 0.0;
  double normalized = std::nan("");
  double accepted_fraction = std::nan("");
  bool coordinator_frozen = false;
};
std::string report_to_json(const ReportRecord& r);
ReportRecord report_from_json(const std::string& line);

std::string trace_to_json(const MaskTraceRecord& t);
MaskTraceRecord trace_from_json(const std::string& line);
std::string channel_event_to_json(const BroadcastChannel::Event& e);
BroadcastChannel::Event channel_event_from_json(const std::string& line);

// Order-independent digest of parameter values (frozen-coordinator proof).
uint64_t params_hash(const nn::ParamStore& ps);

std::unique_ptr<Trainer> make_trainer(const ExperimentConfig& cfg, uint64_t seed);
// Loads and validates a checkpoint against the configured env; mismatched
// kind/agents/width is refused with an explanation.
CheckpointData load_compatible_checkpoint(const std::string& path, const EnvConfig& env);

// Command entry points; return process exit codes (0 = success).
int run_train(const ExperimentConfig& cfg, std::ostream& log);
int run_eval(const ExperimentConfig& cfg, const std::string& checkpoint, int episodes,
             std::ostream& log);
int run_disrupt(const ExperimentConfig& cfg, const std::string& checkpoint,
                std::ostream& log);
int run_comm_analysis(const ExperimentConfig& cfg, const std::string& checkpoint,
                      const std::vector<int>& noisy_counts, std::ostream& log);
int run_finetune(const ExperimentConfig& cfg, const std::string& checkpoint,
                 std::ostream& log);

}  // namespace comix
