#pragma once

#include <optional>
#include <string>

#include "dsim/evaluate.hpp"
#include "dsim/saa.hpp"

namespace dsim {

constexpr int kSummarySchemaVersion = 1;

/// One run's full parameterization; loaded from a JSON config file
/// (docs/config-format.md) and overridable from the command line.
struct RunConfig {
  std::string feeder_path;
  Algorithm algorithm = Algorithm::kAda;
  uint64_t seed = 0;
  std::optional<double> alpha;  // required for the probabilistic schemes

  double load_scale = 1.0;
  double load_std_factor = 0.2;
  double solar_low_factor = 0.5;
  double solar_high_factor = 1.0;

  StepSchedule steps;
  StopRule stop;
  SolveOptions solver;

  std::optional<double> pi;  // overrides the feeder's PV surplus price
  double p0a_min = 0.0;
  double p0a_max = 0.0;  // 0 = twice the total nominal load
  int empirical_pool = 0;
  double slack_penalty = 1e4;

  std::string output_dir = "out";
  int eval_samples = 6000;
  int threads = 0;
  std::vector<int> hist_buses;

  DispatchOptions dispatch_options() const;
  EvalOptions eval_options() const;
};

Algorithm parse_algorithm(const std::string& name);

/// Loads and validates a run configuration. Throws FeederError with the
/// offending field named.
RunConfig load_config(const std::string& path);

/// Loads the feeder named by the config and applies the config's price
/// override.
FeederModel load_configured_feeder(const RunConfig& config);

ScenarioSpec scenario_spec(const RunConfig& config, const FeederModel& model);

/// Converged state persisted by `run` and consumed by `evaluate`.
struct RunSummary {
  int schema_version = kSummarySchemaVersion;
  std::string algorithm;
  std::string feeder;
  uint64_t seed = 0;
  SlowDecision z;
  Vec nu;
  bool converged = false;
  int iterations = 0;
  double cost_estimate = 0.0;
  RunCounters counters;
  double alpha = 0.0;
};

void write_summary(const std::string& path, const RunSummary& summary);
RunSummary read_summary(const std::string& path);  // rejects schema mismatch

void write_trace_csv(const std::string& path, const FeederModel& model,
                     Algorithm algorithm, const RunTrace& trace);

void write_eval_json(const std::string& path, const EvalReport& report);
void write_histograms_csv(const std::string& dir, const EvalReport& report);
void write_perbus_csv(const std::string& path, const EvalReport& report);

void write_scenarios_csv(const std::string& path, const FeederModel& model,
                         const std::vector<Scenario>& scenarios);

void ensure_directory(const std::string& path);

}  // namespace dsim
