#pragma once

#include "dsim/subproblem.hpp"

namespace dsim {

struct SaaResult {
  SolveStatus status = SolveStatus::kNumericalFailure;
  SlowDecision z;
  double cost = 0.0;  // slow cost plus mean slot cost over the scenario set
  int iterations = 0;
};

/// Deterministic equivalent of the averaged-constraint dispatch over a
/// fixed scenario list: one convex program over the slow decision and one
/// recourse block per scenario, with the empirical-mean voltage held in
/// the tight band. Used as the correctness oracle for the iterative scheme.
/// When `fix_z` is given the slow decision is pinned and only the recourse
/// blocks are optimized (yields the empirical cost of a candidate z).
SaaResult saa_oracle(const FeederModel& model, const SensitivityBundle& s,
                     const std::vector<Scenario>& scenarios,
                     const SolveOptions& opts, double p0a_min, double p0a_max,
                     const SlowDecision* fix_z = nullptr);

/// Single-scenario special case used to fix z for the reference schemes.
SaaResult solve_single_scenario(const FeederModel& model, const SensitivityBundle& s,
                                const Scenario& scenario, const SolveOptions& opts,
                                double p0a_min, double p0a_max);

}  // namespace dsim
