#include "dsim/saa.hpp"

#include <cmath>

namespace dsim {

namespace {
constexpr double kPinWidth = 1e-12;
}

SaaResult saa_oracle(const FeederModel& model, const SensitivityBundle& s,
                     const std::vector<Scenario>& scenarios, const SolveOptions& opts,
                     double p0a_min, double p0a_max, const SlowDecision* fix_z) {
  const int n = model.n();
  const int n_d = int(model.diesel_units.size());
  const int K = int(scenarios.size());
  if (K < 1) throw std::invalid_argument("saa_oracle: need at least one scenario");
  if (p0a_max <= p0a_min) p0a_max = p0a_min + 2.0 * model.nominal_p().sum();

  ConicProgram pr;
  pr.name = "saa_k" + std::to_string(K);

  SlowCoupling coupling;
  coupling.v0a_var =
      pr.add_var(0.0, 0.5 * (model.regions.v0_min + model.regions.v0_max));
  coupling.p0a_var = pr.add_var(model.prices.beta, 0.5 * (p0a_min + p0a_max));
  coupling.pd_var_off = pr.n;
  for (int d = 0; d < n_d; ++d) {
    const DieselUnit& unit = model.diesel_units[d];
    const int var = pr.add_var(0.0, 0.5 * (unit.p_min_mw + unit.p_max_mw));
    if (unit.p_max_mw - unit.p_min_mw < kPinWidth) pr.fix_var(var, unit.p_min_mw);
  }
  // Diesel cost epigraphs: t_d >= a p + b p^2.
  const int td_off = pr.n;
  for (int d = 0; d < n_d; ++d) {
    const DieselUnit& unit = model.diesel_units[d];
    const double p_hint = pr.interior_hint[coupling.pd_var_off + d];
    pr.add_var(1.0, unit.cost_linear * p_hint + unit.cost_quad * p_hint * p_hint + 1.0);
    IneqRow& epi = pr.add_ineq(RowTag::kDieselCostEpigraph, d, 0.0);
    epi.lin.push_back({coupling.pd_var_off + d, unit.cost_linear});
    epi.lin.push_back({td_off + d, -1.0});
    if (unit.cost_quad > 0.0) {
      epi.squares.push_back({{coupling.pd_var_off + d, std::sqrt(unit.cost_quad)}});
      epi.square_offsets.push_back(0.0);
    }
  }

  // Slow-decision box.
  {
    IneqRow& lo = pr.add_ineq(RowTag::kSlowBoundLow, 0, -model.regions.v0_min);
    lo.lin.push_back({coupling.v0a_var, -1.0});
    IneqRow& hi = pr.add_ineq(RowTag::kSlowBoundHigh, 0, model.regions.v0_max);
    hi.lin.push_back({coupling.v0a_var, 1.0});
  }
  {
    IneqRow& lo = pr.add_ineq(RowTag::kSlowBoundLow, 1, -p0a_min);
    lo.lin.push_back({coupling.p0a_var, -1.0});
    IneqRow& hi = pr.add_ineq(RowTag::kSlowBoundHigh, 1, p0a_max);
    hi.lin.push_back({coupling.p0a_var, 1.0});
  }
  for (int d = 0; d < n_d; ++d) {
    const DieselUnit& unit = model.diesel_units[d];
    if (unit.p_max_mw - unit.p_min_mw < kPinWidth) continue;
    IneqRow& lo = pr.add_ineq(RowTag::kSlowBoundLow, 2 + d, -unit.p_min_mw);
    lo.lin.push_back({coupling.pd_var_off + d, -1.0});
    IneqRow& hi = pr.add_ineq(RowTag::kSlowBoundHigh, 2 + d, unit.p_max_mw);
    hi.lin.push_back({coupling.pd_var_off + d, 1.0});
  }

  if (fix_z) {
    pr.fix_var(coupling.v0a_var, fix_z->v0a);
    pr.fix_var(coupling.p0a_var, fix_z->p0a);
    for (int d = 0; d < n_d; ++d) pr.fix_var(coupling.pd_var_off + d, fix_z->p_d[d]);
  }

  // One recourse block per scenario, weighted 1/K in the objective.
  std::vector<SlotBlock> blocks;
  blocks.reserve(size_t(K));
  for (int k = 0; k < K; ++k)
    blocks.push_back(append_slot_block(pr, model, s, scenarios[size_t(k)],
                                       VoltageBand::kHard, nullptr, 1.0 / K, coupling,
                                       0.0));

  // Empirical-mean voltage held in the tight band, via aggregation
  // variables so each equality row stays sparse in the KKT system.
  for (int i = 0; i < n; ++i) {
    const int vbar = pr.add_var(0.0, 0.5 * (model.regions.va_min + model.regions.va_max));
    EqRow& def = pr.add_eq(RowTag::kMeanVoltageDef, i + 1, 0.0);
    def.terms.push_back({vbar, 1.0});
    for (int k = 0; k < K; ++k)
      def.terms.push_back({blocks[size_t(k)].v_off + i, -1.0 / K});
    IneqRow& lo = pr.add_ineq(RowTag::kMeanVoltageLow, i + 1, -model.regions.va_min);
    lo.lin.push_back({vbar, -1.0});
    IneqRow& hi = pr.add_ineq(RowTag::kMeanVoltageHigh, i + 1, model.regions.va_max);
    hi.lin.push_back({vbar, 1.0});
  }

  SolveOptions saa_opts = opts;
  saa_opts.max_iters = std::max(opts.max_iters, 200);
  SolveResult res = solve(pr, saa_opts);

  SaaResult out;
  out.status = res.status;
  out.iterations = res.iterations;
  if (res.status != SolveStatus::kOptimal) return out;
  out.z.v0a = res.x[coupling.v0a_var];
  out.z.p0a = res.x[coupling.p0a_var];
  out.z.p_d.resize(n_d);
  for (int d = 0; d < n_d; ++d) out.z.p_d[d] = res.x[coupling.pd_var_off + d];
  // Epigraphs are tight at the optimum, but report the exact costs.
  double slot_sum = 0.0;
  for (int k = 0; k < K; ++k) {
    const SlotBlock& blk = blocks[size_t(k)];
    Vec p_r = res.x.segment(blk.pr_off, model.pv_units.size());
    slot_sum += cost_deviation(model.prices, res.x[blk.p0d_idx]) +
                cost_pv(model.prices.pv_surplus, p_r, blk.p_load_at_pv);
  }
  out.cost = slow_cost(model, out.z) + slot_sum / K;
  return out;
}

SaaResult solve_single_scenario(const FeederModel& model, const SensitivityBundle& s,
                                const Scenario& scenario, const SolveOptions& opts,
                                double p0a_min, double p0a_max) {
  return saa_oracle(model, s, {scenario}, opts, p0a_min, p0a_max);
}

}  // namespace dsim
