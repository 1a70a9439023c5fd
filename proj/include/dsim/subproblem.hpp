#pragma once

#include "dsim/program.hpp"
#include "dsim/scenario.hpp"

namespace dsim {

/// Slow-timescale decision: substation voltage setpoint (squared pu),
/// advance energy block (MW), and diesel schedule (MW per unit).
struct SlowDecision {
  double v0a = 1.0;
  double p0a = 0.0;
  Vec p_d;
};

/// Fast-timescale decision for one slot. Powers in MW/MVAr, v squared-pu.
struct FastDecision {
  Vec p, q, v;
  Vec p_r, q_r;
  double p0 = 0.0;
  double p0_delta = 0.0;
};

/// Duals of the equalities coupling the slow decision into the slot
/// problem, under the convention dual = d(optimal value)/d(rhs).
struct CouplingDuals {
  Vec lambda_p;      // active balance rows, per bus
  double lambda_0 = 0.0;  // substation split row
  Vec lambda_v;      // voltage relation rows, per bus
};

double cost_deviation(const Prices& prices, double p0_delta);
double cost_diesel(const std::vector<DieselUnit>& units, const Vec& p_d);
double cost_pv(const std::vector<double>& pi, const Vec& p_r, const Vec& p_load_at_pv);
/// Slow cost f(z) = diesel cost + beta * p0a.
double slow_cost(const FeederModel& model, const SlowDecision& z);

/// Which voltage band the slot program enforces on bus voltages.
enum class VoltageBand { kHard, kTight };

/// How the slow decision enters a slot block: as fixed numbers on the rhs
/// (per-slot problems) or as shared program variables (multi-scenario
/// deterministic equivalent).
struct SlowCoupling {
  const SlowDecision* fixed = nullptr;
  int v0a_var = -1;
  int p0a_var = -1;
  int pd_var_off = -1;
};

struct SlotBlock {
  int p_off = 0, q_off = 0, v_off = 0, pr_off = 0, qr_off = 0;
  int p0_idx = 0, p0d_idx = 0, tdev_idx = 0, tpv_off = 0;
  int slack_lo_off = -1, slack_up_off = -1;
  std::vector<int> active_rows;
  int split_row = 0;
  std::vector<int> voltage_rows;
  Vec p_load_at_pv;
};

/// Appends one slot's variables and constraints to `pr`. Epigraph variables
/// carry `obj_scale` in the objective; when `nu_weights` is non-null each
/// bus voltage gets the corresponding objective coefficient. Returns the
/// block's variable/row layout.
SlotBlock append_slot_block(ConicProgram& pr, const FeederModel& model,
                            const SensitivityBundle& s, const Scenario& xi,
                            VoltageBand band, const Vec* nu_weights,
                            double obj_scale, const SlowCoupling& coupling,
                            double slack_penalty);

/// A built slot program plus the variable/row bookkeeping needed to read
/// solutions and coupling duals back out.
struct SlotProgram {
  ConicProgram prog;
  int n_bus = 0;
  int n_pv = 0;
  int p_off = 0, q_off = 0, v_off = 0, pr_off = 0, qr_off = 0;
  int p0_idx = 0, p0d_idx = 0, tdev_idx = 0, tpv_off = 0;
  int slack_lo_off = -1, slack_up_off = -1;  // >= 0 in relaxed builds
  std::vector<int> active_rows;   // eq row index per bus
  int split_row = 0;
  std::vector<int> voltage_rows;  // eq row index per bus
  Vec p_load_at_pv;               // local load at each PV bus, for the cost
  const FeederModel* model = nullptr;
};

/// Slot problem with the averaged-constraint multipliers priced into the
/// objective and the hard voltage band enforced.
SlotProgram build_fast_average(const FeederModel& model, const SensitivityBundle& s,
                               const SlowDecision& z, const Vec& nu_lower,
                               const Vec& nu_upper, const Scenario& xi);

/// Slot cost minimization with the tight voltage band enforced.
SlotProgram build_fast_tight(const FeederModel& model, const SensitivityBundle& s,
                             const SlowDecision& z, const Scenario& xi);

/// Slot cost minimization with only the hard voltage band.
SlotProgram build_fast_loose(const FeederModel& model, const SensitivityBundle& s,
                             const SlowDecision& z, const Scenario& xi);

/// Hard-band program with penalized slack on the voltage box; always
/// feasible, used to keep the iteration alive when recourse is inadequate.
SlotProgram build_fast_relaxed(const FeederModel& model, const SensitivityBundle& s,
                               const SlowDecision& z, const Vec& nu_lower,
                               const Vec& nu_upper, const Scenario& xi,
                               double penalty = 1e4);

struct SlotSolution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  FastDecision y;
  CouplingDuals duals;
  double slot_cost = 0.0;  // deviation + PV surplus cost, no multiplier terms
  double objective = 0.0;  // program objective
  double vb_slack = 0.0;   // total voltage-box slack (relaxed builds only)
  int iterations = 0;
};

/// Solve a built slot program and map the result back to typed decisions.
SlotSolution solve_slot(const SlotProgram& sp, const SolveOptions& opts = {});

}  // namespace dsim
