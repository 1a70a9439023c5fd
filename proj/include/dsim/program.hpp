#pragma once

#include <string>
#include <vector>

#include "dsim/feeder.hpp"

namespace dsim {

/// Role of a constraint row inside a built program. Tags make the built
/// structure testable and let callers pull the duals they care about.
enum class RowTag {
  kActiveBalance,      // nodal active power balance (coupling)
  kReactiveBalance,    // nodal reactive power balance
  kSubstationSplit,    // substation draw = block + deviation (coupling)
  kVoltageRelation,    // squared-voltage sensitivity relation (coupling)
  kLossBound,          // substation draw covers delivery plus quadratic losses
  kLineLimit,          // apparent line flow limit
  kPvAvailLow,         // inverter active output nonnegative
  kPvAvailHigh,        // inverter active output below available solar
  kPvFactorHigh,       // q_r <= phi p_r
  kPvFactorLow,        // -q_r <= phi p_r
  kPvApparent,         // inverter apparent power limit
  kVoltageLow,         // lower voltage box
  kVoltageHigh,        // upper voltage box
  kDeviationEpigraphBuy,
  kDeviationEpigraphSell,
  kPvSurplusEpigraph,
  kPvSurplusNonneg,
  kDieselCostEpigraph,  // multi-scenario program only
  kMeanVoltageDef,      // mean voltage aggregation (multi-scenario)
  kMeanVoltageLow,      // empirical-mean voltage band (multi-scenario)
  kMeanVoltageHigh,
  kSlowBoundLow,        // slow-decision box (multi-scenario)
  kSlowBoundHigh,
  kSlackNonneg,         // voltage-box slack variables (relaxed rebuild)
  kPhase1Bound,
};

const char* row_tag_name(RowTag tag);

struct LinTerm {
  int col;
  double coef;
};
using LinExpr = std::vector<LinTerm>;

struct EqRow {
  LinExpr terms;
  double rhs = 0.0;
  RowTag tag{};
  int index = 0;  // bus / line / unit the row belongs to
  bool coupling = false;
};

/// g(x) = sum_k (squares[k].x + square_offsets[k])^2 + lin.x - rhs <= 0.
/// Every quadratic row in the built programs is a sum of squares of affine
/// forms bounded by an affine form, so convexity holds by construction.
struct IneqRow {
  LinExpr lin;
  std::vector<LinExpr> squares;
  std::vector<double> square_offsets;
  double rhs = 0.0;
  RowTag tag{};
  int index = 0;
};

struct ConicProgram {
  std::string name;
  int n = 0;
  std::vector<double> cost;       // linear objective
  std::vector<double> fixed;      // NaN = free variable, else pinned value
  std::vector<EqRow> eq;
  std::vector<IneqRow> ineq;
  std::vector<double> interior_hint;  // strictly feasible for all ineq rows

  int add_var(double obj_coef = 0.0, double hint = 0.0);
  void fix_var(int col, double value);

  EqRow& add_eq(RowTag tag, int index, double rhs, bool coupling = false);
  IneqRow& add_ineq(RowTag tag, int index, double rhs);

  double eq_value(const EqRow& row, const Vec& x) const;    // lhs - rhs
  double ineq_value(const IneqRow& row, const Vec& x) const;  // g(x)
  double objective_value(const Vec& x) const;

  /// Plain-text listing for inspection; not a stable interface.
  std::string dump() const;
};

enum class SolveStatus { kOptimal, kInfeasible, kNumericalFailure };

const char* solve_status_name(SolveStatus status);

struct SolveOptions {
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iters = 100;
};

struct SolveResult {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Vec x;
  Vec eq_duals;    // per eq row: d(optimal value)/d(rhs)
  Vec ineq_duals;  // per ineq row: nonnegative multiplier
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
};

SolveResult solve(const ConicProgram& prog, const SolveOptions& opts = {});

}  // namespace dsim
