#pragma once

#include <cstdint>
#include <optional>

#include "dsim/subproblem.hpp"

namespace dsim {

/// Base step sizes; the k-th iteration uses base / sqrt(k). The primal
/// steps are grouped per coordinate family to match their dynamic ranges.
struct StepSchedule {
  double eps_v0 = 4e-5;
  double eps_p0 = 4e-1;
  double eps_pd = 6e-3;
  double mu = 225.0;  // dual step (use 1.0 for the probabilistic scheme)
};

struct StopRule {
  int max_iters = 20000;
  int window = 500;
  double rel_tol = 1e-4;
};

struct DispatchOptions {
  StepSchedule steps;
  StopRule stop;
  SolveOptions solver;
  double alpha = 0.05;       // probabilistic target
  double p0a_min = 0.0;      // projection box for the energy block
  double p0a_max = 0.0;      // 0 => derive 2 * total nominal load
  double slack_penalty = 1e4;
};

struct IterationRecord {
  SlowDecision z;
  Vec nu;
  SlowDecision z_avg;
  Vec nu_avg;
  double slot_cost = 0.0;
  SolveStatus status = SolveStatus::kOptimal;
  int indicator = -1;  // probabilistic scheme: 1 if outside the tight band
};

struct RunCounters {
  int64_t slack_events = 0;      // hard-band recourse needed slack
  int64_t skips = 0;             // solver failures skipped
  int64_t tight_infeasible = 0;  // tight problem had no feasible point
};

struct RunTrace {
  std::vector<IterationRecord> records;
  SlowDecision z_star;
  Vec nu_star;
  bool converged = false;
  int iterations = 0;
  RunCounters counters;
};

enum class Algorithm { kAda, kPda, kApproxAvg, kApproxProb, kDeterministic };
const char* algorithm_name(Algorithm a);

/// Componentwise projection onto the slow-decision feasible box.
SlowDecision project_slow(const FeederModel& model, const SlowDecision& z,
                          double p0a_min, double p0a_max);

/// Weighted tail average (1/sqrt(i) weights over i = ceil(k/2)..k) of a
/// 1-indexed iterate history; `history[0]` is iterate 1.
double sliding_average(const std::vector<double>& history, int k);

/// Stacked ergodic residual h(y) = (va_min - v ; v - va_max).
Vec ergodic_gap(const VoltageRegions& regions, const Vec& v);

/// [nu + mu h]_+ entrywise.
Vec dual_update_avg(const Vec& nu, double mu_k, const Vec& h);

/// [nu + mu (indicator - alpha)]_+.
double dual_update_prob(double nu, double mu_k, int indicator, double alpha);

/// z - diag(eps) (grad f + coupling-dual term), projected onto the box.
SlowDecision primal_update(const FeederModel& model, const SlowDecision& z,
                           double eps_v0, double eps_p0, double eps_pd,
                           const CouplingDuals& duals, double p0a_min,
                           double p0a_max);

struct StepOutcome {
  SlowDecision z_next;
  Vec nu_next;
  SlotSolution slot;
  bool skipped = false;
  bool relaxed = false;
  bool tight_infeasible = false;
  int indicator = -1;
};

/// One averaged-constraint iteration: solve the priced slot problem at
/// (z, nu) for the realization, then dual ascent on nu and projected
/// subgradient descent on z.
StepOutcome ada_step(const FeederModel& model, const SensitivityBundle& s,
                     const SlowDecision& z, const Vec& nu, const Scenario& xi,
                     const StepSchedule& steps, int k, const DispatchOptions& opts);

/// Pick between the tight solve (may be absent/infeasible) and the loose
/// solve per the indicator-cost comparison; ties keep the tight solution.
/// Returns (selected solution, indicator).
std::pair<const SlotSolution*, int> pda_select(const SlotSolution& loose,
                                               const SlotSolution* tight, double nu,
                                               const VoltageRegions& regions);

/// One probabilistic-constraint iteration (loose solve, conditional tight
/// solve, selection, scalar dual update, z update).
StepOutcome pda_step(const FeederModel& model, const SensitivityBundle& s,
                     const SlowDecision& z, double nu, const Scenario& xi,
                     const StepSchedule& steps, int k, double alpha,
                     const DispatchOptions& opts);

SlowDecision initial_slow(const FeederModel& model, const ScenarioSpec& spec,
                          double p0a_min, double p0a_max);

RunTrace ada_run(const FeederModel& model, const SensitivityBundle& s,
                 ScenarioSource& source, const DispatchOptions& opts);

RunTrace pda_run(const FeederModel& model, const SensitivityBundle& s,
                 ScenarioSource& source, const DispatchOptions& opts);

/// The three reference schemes: the slow decision comes from the
/// deterministic program at the expected scenario; the approximate kinds
/// then run the dual-only iteration with z frozen, the deterministic kind
/// enforces the tight band every slot with no dual state.
RunTrace baseline_run(const FeederModel& model, const SensitivityBundle& s,
                      ScenarioSource& source, Algorithm kind,
                      const DispatchOptions& opts);

struct PolicyOutcome {
  SlotSolution sol;
  int indicator = 0;        // tight-band violation of the implemented slot
  bool relaxed = false;     // hard band needed penalized slack
  bool tight_infeasible = false;
};

PolicyOutcome fast_policy_avg(const FeederModel& model, const SensitivityBundle& s,
                              const SlowDecision& z, const Vec& nu,
                              const Scenario& xi, const SolveOptions& opts,
                              double slack_penalty = 1e4);

PolicyOutcome fast_policy_prob(const FeederModel& model, const SensitivityBundle& s,
                               const SlowDecision& z, double nu, const Scenario& xi,
                               const SolveOptions& opts, double slack_penalty = 1e4);

/// Tight band enforced every slot; falls back to the loose problem (and
/// then to the penalized relaxation) when infeasible.
PolicyOutcome fast_policy_tight(const FeederModel& model, const SensitivityBundle& s,
                                const SlowDecision& z, const Scenario& xi,
                                const SolveOptions& opts, double slack_penalty = 1e4);

}  // namespace dsim
