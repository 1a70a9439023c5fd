#pragma once

#include "dsim/dispatch.hpp"

namespace dsim {

struct EvalReport {
  int n_samples = 0;
  uint64_t seed = 0;
  double expected_cost = 0.0;  // slow cost + mean slot cost, $/h
  double cost_stderr = 0.0;    // standard error of the slot-cost mean
  double slow_cost_part = 0.0;
  double mean_slot_cost = 0.0;
  Vec mean_voltage;            // per bus, squared pu
  double violation_prob_overall = 0.0;  // any bus outside the tight band
  Vec violation_prob_per_bus;
  std::vector<int> hist_buses;
  Vec hist_edges;              // magnitude-pu bin edges (n_bins + 1)
  Mat histograms;              // n_bins x hist_buses.size(), counts
  double hard_violation_max = 0.0;  // worst hard-band / inverter residual
  RunCounters counters;
  int64_t failures = 0;
  std::vector<double> sample_costs;  // per-sample slot cost (paired stats)
};

struct EvalOptions {
  int n_samples = 6000;
  uint64_t seed = 0;
  SolveOptions solver;
  double slack_penalty = 1e4;
  int threads = 0;              // 0 = hardware concurrency, capped by env
  std::vector<int> hist_buses;  // empty = PV buses
  int n_bins = 60;
  double hist_margin = 0.01;    // magnitude pu beyond the hard band
};

/// Evaluates a converged policy over fresh scenario draws. Scenario i uses
/// the evaluation stream of index i, so reports are bit-reproducible for a
/// given (seed, inputs) regardless of the thread count. Throws if more
/// than 1% of the slot solves fail.
EvalReport monte_carlo_eval(const FeederModel& model, const SensitivityBundle& s,
                            const ScenarioSpec& spec, Algorithm algorithm,
                            const SlowDecision& z, const Vec& nu,
                            const EvalOptions& opts);

/// Thread cap from the environment (DISPATCH_THREADS), 0 if unset.
int env_thread_cap();

}  // namespace dsim
