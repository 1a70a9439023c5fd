#include "dsim/subproblem.hpp"

#include <cmath>

namespace dsim {

double cost_deviation(const Prices& prices, double p0_delta) {
  return std::max(prices.gamma_buy * p0_delta, prices.gamma_sell * p0_delta);
}

double cost_diesel(const std::vector<DieselUnit>& units, const Vec& p_d) {
  double c = 0.0;
  for (size_t d = 0; d < units.size(); ++d)
    c += units[d].cost_linear * p_d[int(d)] + units[d].cost_quad * p_d[int(d)] * p_d[int(d)];
  return c;
}

double cost_pv(const std::vector<double>& pi, const Vec& p_r, const Vec& p_load_at_pv) {
  double c = 0.0;
  for (int u = 0; u < p_r.size(); ++u)
    c += pi[u] * std::max(0.0, p_r[u] - p_load_at_pv[u]);
  return c;
}

double slow_cost(const FeederModel& model, const SlowDecision& z) {
  return cost_diesel(model.diesel_units, z.p_d) + model.prices.beta * z.p0a;
}

// Units with no available solar (or no reactive headroom) are pinned rather
// than boxed so the feasible set keeps a nonempty interior.
static constexpr double kPinThreshold = 1e-7;

SlotBlock append_slot_block(ConicProgram& pr, const FeederModel& model,
                            const SensitivityBundle& s, const Scenario& xi,
                            VoltageBand band, const Vec* nu_weights,
                            double obj_scale, const SlowCoupling& coupling,
                            double slack_penalty) {
  const int n = model.n();
  const int u = int(model.pv_units.size());
  const double sbase = model.base_mva;
  const bool relaxed = slack_penalty > 0.0;
  const bool fixed_z = coupling.fixed != nullptr;

  const double v_lo = band == VoltageBand::kTight ? model.regions.va_min : model.regions.vb_min;
  const double v_hi = band == VoltageBand::kTight ? model.regions.va_max : model.regions.vb_max;
  // Strictly interior for both bands since the tight band nests in the hard one.
  const double v_hint = 0.5 * (model.regions.va_min + model.regions.va_max);

  SlotBlock blk;
  blk.p_off = pr.n;
  for (int i = 0; i < n; ++i) pr.add_var(0.0, 0.0);
  blk.q_off = pr.n;
  for (int i = 0; i < n; ++i) pr.add_var(0.0, 0.0);
  blk.v_off = pr.n;
  for (int i = 0; i < n; ++i)
    pr.add_var(nu_weights ? (*nu_weights)[i] : 0.0, v_hint);
  blk.pr_off = pr.n;
  for (int i = 0; i < u; ++i) pr.add_var(0.0, 0.0);
  blk.qr_off = pr.n;
  for (int i = 0; i < u; ++i) pr.add_var(0.0, 0.0);
  blk.p0_idx = pr.add_var(0.0, 1.0);
  blk.p0d_idx = pr.add_var(0.0, 0.0);
  blk.tdev_idx = pr.add_var(obj_scale, 1.0);
  blk.tpv_off = pr.n;
  for (int i = 0; i < u; ++i) pr.add_var(obj_scale, 1.0);
  if (relaxed) {
    blk.slack_lo_off = pr.n;
    for (int i = 0; i < n; ++i) pr.add_var(slack_penalty * obj_scale, 1.0);
    blk.slack_up_off = pr.n;
    for (int i = 0; i < n; ++i) pr.add_var(slack_penalty * obj_scale, 1.0);
  }

  blk.p_load_at_pv.resize(u);
  std::vector<bool> active(u), q_active(u);
  for (int i = 0; i < u; ++i) {
    const PvUnit& pv = model.pv_units[i];
    blk.p_load_at_pv[i] = xi.p_load_mw[pv.bus - 1];
    active[i] = xi.solar_avail_mw[i] > kPinThreshold;
    q_active[i] = active[i] && pv.phi() > kPinThreshold;
    if (!active[i]) {
      pr.fix_var(blk.pr_off + i, 0.0);
      pr.fix_var(blk.qr_off + i, 0.0);
    } else {
      pr.interior_hint[blk.pr_off + i] =
          0.5 * std::min(xi.solar_avail_mw[i], pv.inverter_mva);
      if (!q_active[i]) pr.fix_var(blk.qr_off + i, 0.0);
      const double surplus =
          model.prices.pv_surplus[i] *
          (pr.interior_hint[blk.pr_off + i] - blk.p_load_at_pv[i]);
      pr.interior_hint[blk.tpv_off + i] = std::max(0.0, surplus) + 1.0;
    }
  }

  // Nodal balance equalities: diesel appears on the rhs when the slow
  // decision is fixed and as -p_d terms when it is a shared variable.
  const Vec diesel = fixed_z ? model.diesel_injection(coupling.fixed->p_d) : Vec();
  for (int i = 0; i < n; ++i) {
    const double rhs = (fixed_z ? diesel[i] : 0.0) - xi.p_load_mw[i];
    EqRow& row = pr.add_eq(RowTag::kActiveBalance, i + 1, rhs, true);
    row.terms.push_back({blk.p_off + i, 1.0});
    for (int k = 0; k < u; ++k)
      if (model.pv_units[k].bus == i + 1) row.terms.push_back({blk.pr_off + k, -1.0});
    if (!fixed_z)
      for (size_t d = 0; d < model.diesel_units.size(); ++d)
        if (model.diesel_units[d].bus == i + 1)
          row.terms.push_back({coupling.pd_var_off + int(d), -1.0});
    blk.active_rows.push_back(int(pr.eq.size()) - 1);
  }
  for (int i = 0; i < n; ++i) {
    EqRow& row = pr.add_eq(RowTag::kReactiveBalance, i + 1, -xi.q_load_mvar[i]);
    row.terms.push_back({blk.q_off + i, 1.0});
    for (int k = 0; k < u; ++k)
      if (model.pv_units[k].bus == i + 1) row.terms.push_back({blk.qr_off + k, -1.0});
  }
  {
    EqRow& row = pr.add_eq(RowTag::kSubstationSplit, 0,
                           fixed_z ? coupling.fixed->p0a : 0.0, true);
    row.terms.push_back({blk.p0_idx, 1.0});
    row.terms.push_back({blk.p0d_idx, -1.0});
    if (!fixed_z) row.terms.push_back({coupling.p0a_var, -1.0});
    blk.split_row = int(pr.eq.size()) - 1;
  }
  // v - 2 R~ p - 2 X~ q = v0a per bus, with R~ = R/base so powers stay in MW.
  for (int i = 0; i < n; ++i) {
    EqRow& row = pr.add_eq(RowTag::kVoltageRelation, i + 1,
                           fixed_z ? coupling.fixed->v0a : 0.0, true);
    row.terms.push_back({blk.v_off + i, 1.0});
    for (int j = 0; j < n; ++j) {
      row.terms.push_back({blk.p_off + j, -2.0 * s.R(i, j) / sbase});
      row.terms.push_back({blk.q_off + j, -2.0 * s.X(i, j) / sbase});
    }
    if (!fixed_z) row.terms.push_back({coupling.v0a_var, -1.0});
    blk.voltage_rows.push_back(int(pr.eq.size()) - 1);
  }

  // Substation draw covers net delivery plus quadratic losses.
  {
    IneqRow& row = pr.add_ineq(RowTag::kLossBound, 0, 0.0);
    for (int i = 0; i < n; ++i) row.lin.push_back({blk.p_off + i, -1.0});
    row.lin.push_back({blk.p0_idx, -1.0});
    for (int l = 0; l < n; ++l) {
      const double w = std::sqrt(model.lines[l].r_pu / sbase);
      LinExpr wp, wq;
      for (int i = 0; i < n; ++i) {
        if (s.F(i, l) != 0.0) {
          wp.push_back({blk.p_off + i, w * s.F(i, l)});
          wq.push_back({blk.q_off + i, w * s.F(i, l)});
        }
      }
      row.squares.push_back(std::move(wp));
      row.square_offsets.push_back(0.0);
      row.squares.push_back(std::move(wq));
      row.square_offsets.push_back(0.0);
    }
  }

  // Apparent power flow limit per line.
  for (int l = 0; l < n; ++l) {
    IneqRow& row = pr.add_ineq(RowTag::kLineLimit, l + 1,
                               model.lines[l].s_max_mva * model.lines[l].s_max_mva);
    LinExpr fp, fq;
    for (int i = 0; i < n; ++i) {
      if (s.F(i, l) != 0.0) {
        fp.push_back({blk.p_off + i, s.F(i, l)});
        fq.push_back({blk.q_off + i, s.F(i, l)});
      }
    }
    row.squares.push_back(std::move(fp));
    row.square_offsets.push_back(0.0);
    row.squares.push_back(std::move(fq));
    row.square_offsets.push_back(0.0);
  }

  // Inverter feasible set per active unit.
  for (int k = 0; k < u; ++k) {
    if (!active[k]) continue;
    const PvUnit& pv = model.pv_units[k];
    pr.add_ineq(RowTag::kPvAvailLow, k, 0.0).lin.push_back({blk.pr_off + k, -1.0});
    pr.add_ineq(RowTag::kPvAvailHigh, k, xi.solar_avail_mw[k])
        .lin.push_back({blk.pr_off + k, 1.0});
    if (q_active[k]) {
      IneqRow& hi = pr.add_ineq(RowTag::kPvFactorHigh, k, 0.0);
      hi.lin.push_back({blk.qr_off + k, 1.0});
      hi.lin.push_back({blk.pr_off + k, -pv.phi()});
      IneqRow& lo = pr.add_ineq(RowTag::kPvFactorLow, k, 0.0);
      lo.lin.push_back({blk.qr_off + k, -1.0});
      lo.lin.push_back({blk.pr_off + k, -pv.phi()});
    }
    IneqRow& app =
        pr.add_ineq(RowTag::kPvApparent, k, pv.inverter_mva * pv.inverter_mva);
    app.squares.push_back({{blk.pr_off + k, 1.0}});
    app.square_offsets.push_back(0.0);
    app.squares.push_back({{blk.qr_off + k, 1.0}});
    app.square_offsets.push_back(0.0);
  }

  // Voltage box (with slack in the relaxed build).
  for (int i = 0; i < n; ++i) {
    IneqRow& lo = pr.add_ineq(RowTag::kVoltageLow, i + 1, -v_lo);
    lo.lin.push_back({blk.v_off + i, -1.0});
    if (relaxed) lo.lin.push_back({blk.slack_lo_off + i, -1.0});
    IneqRow& hi = pr.add_ineq(RowTag::kVoltageHigh, i + 1, v_hi);
    hi.lin.push_back({blk.v_off + i, 1.0});
    if (relaxed) hi.lin.push_back({blk.slack_up_off + i, -1.0});
  }
  if (relaxed) {
    for (int i = 0; i < 2 * n; ++i)
      pr.add_ineq(RowTag::kSlackNonneg, i, 0.0).lin.push_back({blk.slack_lo_off + i, -1.0});
  }

  // Deviation charge epigraph: t >= gamma_buy * d and t >= gamma_sell * d.
  {
    IneqRow& buy = pr.add_ineq(RowTag::kDeviationEpigraphBuy, 0, 0.0);
    buy.lin.push_back({blk.p0d_idx, model.prices.gamma_buy});
    buy.lin.push_back({blk.tdev_idx, -1.0});
    IneqRow& sell = pr.add_ineq(RowTag::kDeviationEpigraphSell, 0, 0.0);
    sell.lin.push_back({blk.p0d_idx, model.prices.gamma_sell});
    sell.lin.push_back({blk.tdev_idx, -1.0});
  }

  // PV surplus epigraph: t >= pi * (p_r - local load), t >= 0.
  for (int k = 0; k < u; ++k) {
    if (!active[k]) {
      pr.fix_var(blk.tpv_off + k, 0.0);
      continue;
    }
    const double pi = model.prices.pv_surplus[k];
    IneqRow& epi = pr.add_ineq(RowTag::kPvSurplusEpigraph, k, pi * blk.p_load_at_pv[k]);
    epi.lin.push_back({blk.pr_off + k, pi});
    epi.lin.push_back({blk.tpv_off + k, -1.0});
    pr.add_ineq(RowTag::kPvSurplusNonneg, k, 0.0).lin.push_back({blk.tpv_off + k, -1.0});
  }

  return blk;
}

namespace {

SlotProgram build_slot(const FeederModel& model, const SensitivityBundle& s,
                       const SlowDecision& z, const Vec& nu_lower, const Vec& nu_upper,
                       const Scenario& xi, VoltageBand band, double slack_penalty) {
  SlotProgram sp;
  sp.n_bus = model.n();
  sp.n_pv = int(model.pv_units.size());
  sp.model = &model;
  sp.prog.name = slack_penalty > 0.0
                     ? "slot_relaxed"
                     : (band == VoltageBand::kTight ? "slot_tight" : "slot");

  Vec weights;
  const Vec* nu_weights = nullptr;
  if (nu_lower.size() > 0) {
    weights = nu_upper - nu_lower;
    nu_weights = &weights;
  }
  SlowCoupling coupling;
  coupling.fixed = &z;
  SlotBlock blk = append_slot_block(sp.prog, model, s, xi, band, nu_weights, 1.0,
                                    coupling, slack_penalty);
  sp.p_off = blk.p_off;
  sp.q_off = blk.q_off;
  sp.v_off = blk.v_off;
  sp.pr_off = blk.pr_off;
  sp.qr_off = blk.qr_off;
  sp.p0_idx = blk.p0_idx;
  sp.p0d_idx = blk.p0d_idx;
  sp.tdev_idx = blk.tdev_idx;
  sp.tpv_off = blk.tpv_off;
  sp.slack_lo_off = blk.slack_lo_off;
  sp.slack_up_off = blk.slack_up_off;
  sp.active_rows = blk.active_rows;
  sp.split_row = blk.split_row;
  sp.voltage_rows = blk.voltage_rows;
  sp.p_load_at_pv = blk.p_load_at_pv;
  return sp;
}

}  // namespace

SlotProgram build_fast_average(const FeederModel& model, const SensitivityBundle& s,
                               const SlowDecision& z, const Vec& nu_lower,
                               const Vec& nu_upper, const Scenario& xi) {
  return build_slot(model, s, z, nu_lower, nu_upper, xi, VoltageBand::kHard, 0.0);
}

SlotProgram build_fast_tight(const FeederModel& model, const SensitivityBundle& s,
                             const SlowDecision& z, const Scenario& xi) {
  return build_slot(model, s, z, Vec(), Vec(), xi, VoltageBand::kTight, 0.0);
}

SlotProgram build_fast_loose(const FeederModel& model, const SensitivityBundle& s,
                             const SlowDecision& z, const Scenario& xi) {
  return build_slot(model, s, z, Vec(), Vec(), xi, VoltageBand::kHard, 0.0);
}

SlotProgram build_fast_relaxed(const FeederModel& model, const SensitivityBundle& s,
                               const SlowDecision& z, const Vec& nu_lower,
                               const Vec& nu_upper, const Scenario& xi, double penalty) {
  return build_slot(model, s, z, nu_lower, nu_upper, xi, VoltageBand::kHard, penalty);
}

SlotSolution solve_slot(const SlotProgram& sp, const SolveOptions& opts) {
  SlotSolution out;
  SolveResult res = solve(sp.prog, opts);
  out.status = res.status;
  out.iterations = res.iterations;
  if (res.status != SolveStatus::kOptimal) return out;

  const int n = sp.n_bus;
  const int u = sp.n_pv;
  out.y.p = res.x.segment(sp.p_off, n);
  out.y.q = res.x.segment(sp.q_off, n);
  out.y.v = res.x.segment(sp.v_off, n);
  out.y.p_r = res.x.segment(sp.pr_off, u);
  out.y.q_r = res.x.segment(sp.qr_off, u);
  out.y.p0 = res.x[sp.p0_idx];
  out.y.p0_delta = res.x[sp.p0d_idx];

  out.duals.lambda_p.resize(n);
  out.duals.lambda_v.resize(n);
  for (int i = 0; i < n; ++i) {
    out.duals.lambda_p[i] = res.eq_duals[sp.active_rows[i]];
    out.duals.lambda_v[i] = res.eq_duals[sp.voltage_rows[i]];
  }
  out.duals.lambda_0 = res.eq_duals[sp.split_row];

  const FeederModel& model = *sp.model;
  out.slot_cost = cost_deviation(model.prices, out.y.p0_delta) +
                  cost_pv(model.prices.pv_surplus, out.y.p_r, sp.p_load_at_pv);
  out.objective = res.objective;
  if (sp.slack_lo_off >= 0) out.vb_slack = res.x.segment(sp.slack_lo_off, 2 * n).sum();
  return out;
}

}  // namespace dsim
