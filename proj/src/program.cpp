#include "dsim/program.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace dsim {

const char* row_tag_name(RowTag tag) {
  switch (tag) {
    case RowTag::kActiveBalance: return "active_balance";
    case RowTag::kReactiveBalance: return "reactive_balance";
    case RowTag::kSubstationSplit: return "substation_split";
    case RowTag::kVoltageRelation: return "voltage_relation";
    case RowTag::kLossBound: return "loss_bound";
    case RowTag::kLineLimit: return "line_limit";
    case RowTag::kPvAvailLow: return "pv_avail_low";
    case RowTag::kPvAvailHigh: return "pv_avail_high";
    case RowTag::kPvFactorHigh: return "pv_factor_high";
    case RowTag::kPvFactorLow: return "pv_factor_low";
    case RowTag::kPvApparent: return "pv_apparent";
    case RowTag::kVoltageLow: return "voltage_low";
    case RowTag::kVoltageHigh: return "voltage_high";
    case RowTag::kDeviationEpigraphBuy: return "deviation_epigraph_buy";
    case RowTag::kDeviationEpigraphSell: return "deviation_epigraph_sell";
    case RowTag::kPvSurplusEpigraph: return "pv_surplus_epigraph";
    case RowTag::kPvSurplusNonneg: return "pv_surplus_nonneg";
    case RowTag::kDieselCostEpigraph: return "diesel_cost_epigraph";
    case RowTag::kMeanVoltageDef: return "mean_voltage_def";
    case RowTag::kMeanVoltageLow: return "mean_voltage_low";
    case RowTag::kMeanVoltageHigh: return "mean_voltage_high";
    case RowTag::kSlowBoundLow: return "slow_bound_low";
    case RowTag::kSlowBoundHigh: return "slow_bound_high";
    case RowTag::kSlackNonneg: return "slack_nonneg";
    case RowTag::kPhase1Bound: return "phase1_bound";
  }
  return "?";
}

const char* solve_status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kNumericalFailure: return "numerical_failure";
  }
  return "?";
}

int ConicProgram::add_var(double obj_coef, double hint) {
  cost.push_back(obj_coef);
  fixed.push_back(std::numeric_limits<double>::quiet_NaN());
  interior_hint.push_back(hint);
  return n++;
}

void ConicProgram::fix_var(int col, double value) {
  fixed[col] = value;
  interior_hint[col] = value;
}

EqRow& ConicProgram::add_eq(RowTag tag, int index, double rhs, bool coupling) {
  eq.push_back(EqRow{{}, rhs, tag, index, coupling});
  return eq.back();
}

IneqRow& ConicProgram::add_ineq(RowTag tag, int index, double rhs) {
  ineq.push_back(IneqRow{{}, {}, {}, rhs, tag, index});
  return ineq.back();
}

namespace {
double dot(const LinExpr& e, const Vec& x) {
  double s = 0.0;
  for (const LinTerm& t : e) s += t.coef * x[t.col];
  return s;
}
}  // namespace

double ConicProgram::eq_value(const EqRow& row, const Vec& x) const {
  return dot(row.terms, x) - row.rhs;
}

double ConicProgram::ineq_value(const IneqRow& row, const Vec& x) const {
  double g = dot(row.lin, x) - row.rhs;
  for (size_t k = 0; k < row.squares.size(); ++k) {
    const double w = dot(row.squares[k], x) + row.square_offsets[k];
    g += w * w;
  }
  return g;
}

double ConicProgram::objective_value(const Vec& x) const {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += cost[i] * x[i];
  return s;
}

std::string ConicProgram::dump() const {
  std::ostringstream os;
  auto expr = [&](const LinExpr& e) {
    std::ostringstream t;
    for (size_t i = 0; i < e.size(); ++i) {
      if (i) t << " + ";
      t << e[i].coef << "*x" << e[i].col;
    }
    return t.str();
  };
  os << "program " << name << " (" << n << " vars, " << eq.size() << " eq, "
     << ineq.size() << " ineq)\nmin ";
  bool first = true;
  for (int i = 0; i < n; ++i) {
    if (cost[i] == 0.0) continue;
    if (!first) os << " + ";
    os << cost[i] << "*x" << i;
    first = false;
  }
  os << "\n";
  for (int i = 0; i < n; ++i)
    if (!std::isnan(fixed[i])) os << "  x" << i << " = " << fixed[i] << " (fixed)\n";
  for (const EqRow& r : eq)
    os << "  [" << row_tag_name(r.tag) << ":" << r.index << (r.coupling ? "*" : "")
       << "] " << expr(r.terms) << " == " << r.rhs << "\n";
  for (const IneqRow& r : ineq) {
    os << "  [" << row_tag_name(r.tag) << ":" << r.index << "] ";
    for (size_t k = 0; k < r.squares.size(); ++k)
      os << "(" << expr(r.squares[k]) << " + " << r.square_offsets[k] << ")^2 + ";
    os << expr(r.lin) << " <= " << r.rhs << "\n";
  }
  return os.str();
}

}  // namespace dsim
