#include "dsim/dispatch.hpp"

#include <cmath>

#include "dsim/saa.hpp"

namespace dsim {

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kAda: return "ada";
    case Algorithm::kPda: return "pda";
    case Algorithm::kApproxAvg: return "approx_avg";
    case Algorithm::kApproxProb: return "approx_prob";
    case Algorithm::kDeterministic: return "deterministic";
  }
  return "?";
}

namespace {
double clamp(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

double default_p0a_max(const FeederModel& model, double configured) {
  if (configured > 0.0) return configured;
  return 2.0 * model.nominal_p().sum();
}
}  // namespace

SlowDecision project_slow(const FeederModel& model, const SlowDecision& z,
                          double p0a_min, double p0a_max) {
  SlowDecision out = z;
  out.v0a = clamp(z.v0a, model.regions.v0_min, model.regions.v0_max);
  out.p0a = clamp(z.p0a, p0a_min, default_p0a_max(model, p0a_max));
  out.p_d.resize(model.diesel_units.size());
  for (size_t d = 0; d < model.diesel_units.size(); ++d)
    out.p_d[int(d)] =
        clamp(z.p_d[int(d)], model.diesel_units[d].p_min_mw, model.diesel_units[d].p_max_mw);
  return out;
}

double sliding_average(const std::vector<double>& history, int k) {
  const int start = (k + 1) / 2;  // ceil(k/2)
  double num = 0.0, den = 0.0;
  for (int i = start; i <= k; ++i) {
    const double w = 1.0 / std::sqrt(double(i));
    num += history[size_t(i - 1)] * w;
    den += w;
  }
  return num / den;
}

Vec ergodic_gap(const VoltageRegions& regions, const Vec& v) {
  const int n = int(v.size());
  Vec h(2 * n);
  h.head(n) = Vec::Constant(n, regions.va_min) - v;
  h.tail(n) = v - Vec::Constant(n, regions.va_max);
  return h;
}

Vec dual_update_avg(const Vec& nu, double mu_k, const Vec& h) {
  return (nu + mu_k * h).cwiseMax(0.0);
}

double dual_update_prob(double nu, double mu_k, int indicator, double alpha) {
  return std::max(0.0, nu + mu_k * (double(indicator) - alpha));
}

SlowDecision primal_update(const FeederModel& model, const SlowDecision& z,
                           double eps_v0, double eps_p0, double eps_pd,
                           const CouplingDuals& duals, double p0a_min,
                           double p0a_max) {
  SlowDecision raw = z;
  raw.v0a -= eps_v0 * duals.lambda_v.sum();
  raw.p0a -= eps_p0 * (model.prices.beta + duals.lambda_0);
  for (size_t d = 0; d < model.diesel_units.size(); ++d) {
    const DieselUnit& unit = model.diesel_units[d];
    const double grad = unit.cost_linear + 2.0 * unit.cost_quad * z.p_d[int(d)] +
                        duals.lambda_p[unit.bus - 1];
    raw.p_d[int(d)] -= eps_pd * grad;
  }
  return project_slow(model, raw, p0a_min, p0a_max);
}

namespace {

/// Solve the averaged slot problem, falling back to the penalized
/// relaxation when the hard band admits no recourse.
SlotSolution solve_average_with_fallback(const FeederModel& model,
                                         const SensitivityBundle& s,
                                         const SlowDecision& z, const Vec& nu_lo,
                                         const Vec& nu_up, const Scenario& xi,
                                         const DispatchOptions& opts, bool& relaxed) {
  SlotProgram sp = build_fast_average(model, s, z, nu_lo, nu_up, xi);
  SlotSolution sol = solve_slot(sp, opts.solver);
  relaxed = false;
  if (sol.status == SolveStatus::kInfeasible) {
    relaxed = true;
    SlotProgram rp = build_fast_relaxed(model, s, z, nu_lo, nu_up, xi, opts.slack_penalty);
    sol = solve_slot(rp, opts.solver);
  }
  return sol;
}

SlotSolution solve_loose_with_fallback(const FeederModel& model,
                                       const SensitivityBundle& s,
                                       const SlowDecision& z, const Scenario& xi,
                                       const DispatchOptions& opts, bool& relaxed) {
  return solve_average_with_fallback(model, s, z, Vec(), Vec(), xi, opts, relaxed);
}

bool in_tight_band(const VoltageRegions& regions, const Vec& v) {
  return (v.array() >= regions.va_min).all() && (v.array() <= regions.va_max).all();
}

}  // namespace

StepOutcome ada_step(const FeederModel& model, const SensitivityBundle& s,
                     const SlowDecision& z, const Vec& nu, const Scenario& xi,
                     const StepSchedule& steps, int k, const DispatchOptions& opts) {
  const int n = model.n();
  StepOutcome out;
  const Vec nu_lo = nu.head(n);
  const Vec nu_up = nu.tail(n);
  out.slot = solve_average_with_fallback(model, s, z, nu_lo, nu_up, xi, opts, out.relaxed);
  if (out.slot.status != SolveStatus::kOptimal) {
    out.skipped = true;
    out.z_next = z;
    out.nu_next = nu;
    return out;
  }
  const double root_k = std::sqrt(double(k));
  out.nu_next = dual_update_avg(nu, steps.mu / root_k, ergodic_gap(model.regions, out.slot.y.v));
  out.z_next = primal_update(model, z, steps.eps_v0 / root_k, steps.eps_p0 / root_k,
                             steps.eps_pd / root_k, out.slot.duals, opts.p0a_min,
                             opts.p0a_max);
  return out;
}

std::pair<const SlotSolution*, int> pda_select(const SlotSolution& loose,
                                               const SlotSolution* tight, double nu,
                                               const VoltageRegions& regions) {
  if (in_tight_band(regions, loose.y.v)) return {&loose, 0};
  if (tight == nullptr || tight->status != SolveStatus::kOptimal)
    return {&loose, 1};  // tight cost is +infinity
  if (loose.slot_cost + nu < tight->slot_cost) return {&loose, 1};
  return {tight, 0};
}

StepOutcome pda_step(const FeederModel& model, const SensitivityBundle& s,
                     const SlowDecision& z, double nu, const Scenario& xi,
                     const StepSchedule& steps, int k, double alpha,
                     const DispatchOptions& opts) {
  StepOutcome out;
  SlotSolution loose = solve_loose_with_fallback(model, s, z, xi, opts, out.relaxed);
  if (loose.status != SolveStatus::kOptimal) {
    out.skipped = true;
    out.z_next = z;
    out.nu_next = Vec::Constant(1, nu);
    return out;
  }
  SlotSolution tight;
  const SlotSolution* tight_ptr = nullptr;
  if (!in_tight_band(model.regions, loose.y.v)) {
    tight = solve_slot(build_fast_tight(model, s, z, xi), opts.solver);
    tight_ptr = &tight;
    if (tight.status == SolveStatus::kInfeasible) out.tight_infeasible = true;
  }
  auto [selected, indicator] = pda_select(loose, tight_ptr, nu, model.regions);
  out.indicator = indicator;
  out.slot = *selected;

  const double root_k = std::sqrt(double(k));
  out.nu_next = Vec::Constant(1, dual_update_prob(nu, steps.mu / root_k, indicator, alpha));
  out.z_next = primal_update(model, z, steps.eps_v0 / root_k, steps.eps_p0 / root_k,
                             steps.eps_pd / root_k, out.slot.duals, opts.p0a_min,
                             opts.p0a_max);
  return out;
}

SlowDecision initial_slow(const FeederModel& model, const ScenarioSpec& spec,
                          double p0a_min, double p0a_max) {
  SlowDecision z;
  z.v0a = 0.5 * (model.regions.v0_min + model.regions.v0_max);
  z.p_d.resize(model.diesel_units.size());
  for (size_t d = 0; d < model.diesel_units.size(); ++d)
    z.p_d[int(d)] =
        0.5 * (model.diesel_units[d].p_min_mw + model.diesel_units[d].p_max_mw);
  const double mid_solar = 0.5 * (spec.solar_low_factor + spec.solar_high_factor);
  z.p0a = spec.p_mean_mw.sum() - mid_solar * spec.pv_rating_mw.sum();
  return project_slow(model, z, p0a_min, p0a_max);
}

namespace {

/// Shared driver: per-iteration step function, sliding averages via prefix
/// sums, windowed relative-change stopping, skip accounting.
template <typename StepFn>
RunTrace run_loop(const FeederModel& model, ScenarioSource& source,
                  const DispatchOptions& opts, SlowDecision z, Vec nu, StepFn step) {
  const int n_d = int(model.diesel_units.size());
  const int zdim = 2 + n_d;
  const int dim = zdim + int(nu.size());

  RunTrace trace;
  trace.records.reserve(size_t(opts.stop.max_iters));
  std::vector<Vec> cum;  // cumulative sum of iterate/sqrt(i)
  cum.reserve(size_t(opts.stop.max_iters) + 1);
  cum.push_back(Vec::Zero(dim));
  std::vector<double> wcum{0.0};

  auto pack = [&](const SlowDecision& zz, const Vec& nn) {
    Vec x(dim);
    x[0] = zz.v0a;
    x[1] = zz.p0a;
    x.segment(2, n_d) = zz.p_d;
    x.tail(nn.size()) = nn;
    return x;
  };

  int k = 0;
  int64_t solves = 0;
  uint64_t draw_idx = 0;
  while (k < opts.stop.max_iters) {
    const int iter = k + 1;
    const Scenario xi = source.draw(++draw_idx);
    StepOutcome o = step(z, nu, xi, iter);
    ++solves;
    if (o.relaxed) ++trace.counters.slack_events;
    if (o.tight_infeasible) ++trace.counters.tight_infeasible;
    if (o.skipped) {
      ++trace.counters.skips;
      if (solves >= 100 && trace.counters.skips * 100 > solves)
        throw std::runtime_error("dispatch: more than 1% of slot solves failed");
      continue;
    }
    ++k;
    z = o.z_next;
    nu = o.nu_next;

    const Vec x = pack(z, nu);
    const double w = 1.0 / std::sqrt(double(k));
    cum.push_back(cum.back() + w * x);
    wcum.push_back(wcum.back() + w);
    const int start = (k + 1) / 2;  // ceil(k/2)
    const Vec avg = (cum[size_t(k)] - cum[size_t(start - 1)]) /
                    (wcum[size_t(k)] - wcum[size_t(start - 1)]);

    IterationRecord rec;
    rec.z = z;
    rec.nu = nu;
    rec.z_avg.v0a = avg[0];
    rec.z_avg.p0a = avg[1];
    rec.z_avg.p_d = avg.segment(2, n_d);
    rec.nu_avg = avg.tail(nu.size());
    rec.slot_cost = o.slot.slot_cost;
    rec.status = o.slot.status;
    rec.indicator = o.indicator;
    trace.records.push_back(std::move(rec));

    if (k >= 2 * opts.stop.window) {
      const IterationRecord& old = trace.records[size_t(k - 1 - opts.stop.window)];
      Vec old_avg = pack(old.z_avg, old.nu_avg);
      bool settled = true;
      for (int i = 0; i < dim && settled; ++i)
        settled = std::abs(avg[i] - old_avg[i]) <= opts.stop.rel_tol * std::max(std::abs(avg[i]), 1e-3);
      if (settled) {
        trace.converged = true;
        break;
      }
    }
  }

  trace.iterations = k;
  if (k == 0) {
    trace.z_star = z;
    trace.nu_star = nu;
    trace.converged = true;
    return trace;
  }
  const IterationRecord& last = trace.records.back();
  trace.z_star = last.z_avg;
  trace.nu_star = last.nu_avg;
  return trace;
}

}  // namespace

RunTrace ada_run(const FeederModel& model, const SensitivityBundle& s,
                 ScenarioSource& source, const DispatchOptions& opts) {
  SlowDecision z0 = initial_slow(model, source.spec(), opts.p0a_min, opts.p0a_max);
  Vec nu0 = Vec::Zero(2 * model.n());
  return run_loop(model, source, opts, z0, nu0,
                  [&](const SlowDecision& z, const Vec& nu, const Scenario& xi, int k) {
                    return ada_step(model, s, z, nu, xi, opts.steps, k, opts);
                  });
}

RunTrace pda_run(const FeederModel& model, const SensitivityBundle& s,
                 ScenarioSource& source, const DispatchOptions& opts) {
  SlowDecision z0 = initial_slow(model, source.spec(), opts.p0a_min, opts.p0a_max);
  Vec nu0 = Vec::Zero(1);
  return run_loop(model, source, opts, z0, nu0,
                  [&](const SlowDecision& z, const Vec& nu, const Scenario& xi, int k) {
                    return pda_step(model, s, z, nu[0], xi, opts.steps, k, opts.alpha, opts);
                  });
}

RunTrace baseline_run(const FeederModel& model, const SensitivityBundle& s,
                      ScenarioSource& source, Algorithm kind,
                      const DispatchOptions& opts) {
  const Scenario mean = expected_scenario(source.spec());
  SaaResult fixed = solve_single_scenario(model, s, mean, opts.solver, opts.p0a_min,
                                          opts.p0a_max);
  if (fixed.status != SolveStatus::kOptimal)
    throw std::runtime_error(
        "baseline: expected-scenario program failed: " +
        std::string(solve_status_name(fixed.status)));
  const SlowDecision z_fix = fixed.z;

  if (kind == Algorithm::kDeterministic) {
    RunTrace trace;
    trace.z_star = z_fix;
    trace.nu_star = Vec::Zero(0);
    trace.converged = true;
    return trace;
  }

  if (kind == Algorithm::kApproxAvg) {
    Vec nu0 = Vec::Zero(2 * model.n());
    return run_loop(model, source, opts, z_fix, nu0,
                    [&](const SlowDecision& z, const Vec& nu, const Scenario& xi, int k) {
                      StepOutcome o = ada_step(model, s, z, nu, xi, opts.steps, k, opts);
                      o.z_next = z;  // slow decision stays frozen
                      return o;
                    });
  }
  if (kind == Algorithm::kApproxProb) {
    Vec nu0 = Vec::Zero(1);
    return run_loop(model, source, opts, z_fix, nu0,
                    [&](const SlowDecision& z, const Vec& nu, const Scenario& xi, int k) {
                      StepOutcome o =
                          pda_step(model, s, z, nu[0], xi, opts.steps, k, opts.alpha, opts);
                      o.z_next = z;
                      return o;
                    });
  }
  throw std::runtime_error("baseline_run: unsupported algorithm");
}

PolicyOutcome fast_policy_avg(const FeederModel& model, const SensitivityBundle& s,
                              const SlowDecision& z, const Vec& nu, const Scenario& xi,
                              const SolveOptions& opts, double slack_penalty) {
  const int n = model.n();
  PolicyOutcome out;
  DispatchOptions dopts;
  dopts.solver = opts;
  dopts.slack_penalty = slack_penalty;
  out.sol = solve_average_with_fallback(model, s, z, nu.head(n), nu.tail(n), xi, dopts,
                                        out.relaxed);
  if (out.sol.status == SolveStatus::kOptimal)
    out.indicator = in_tight_band(model.regions, out.sol.y.v) ? 0 : 1;
  return out;
}

PolicyOutcome fast_policy_prob(const FeederModel& model, const SensitivityBundle& s,
                               const SlowDecision& z, double nu, const Scenario& xi,
                               const SolveOptions& opts, double slack_penalty) {
  PolicyOutcome out;
  DispatchOptions dopts;
  dopts.solver = opts;
  dopts.slack_penalty = slack_penalty;
  SlotSolution loose = solve_loose_with_fallback(model, s, z, xi, dopts, out.relaxed);
  out.sol = loose;
  if (loose.status != SolveStatus::kOptimal) return out;
  if (in_tight_band(model.regions, loose.y.v)) {
    out.indicator = 0;
    return out;
  }
  SlotSolution tight = solve_slot(build_fast_tight(model, s, z, xi), opts);
  if (tight.status == SolveStatus::kInfeasible) out.tight_infeasible = true;
  auto [selected, indicator] = pda_select(loose, &tight, nu, model.regions);
  out.sol = *selected;
  out.indicator = indicator;
  return out;
}

PolicyOutcome fast_policy_tight(const FeederModel& model, const SensitivityBundle& s,
                                const SlowDecision& z, const Scenario& xi,
                                const SolveOptions& opts, double slack_penalty) {
  PolicyOutcome out;
  SlotSolution tight = solve_slot(build_fast_tight(model, s, z, xi), opts);
  if (tight.status == SolveStatus::kOptimal) {
    out.sol = tight;
    out.indicator = 0;
    return out;
  }
  if (tight.status == SolveStatus::kInfeasible) out.tight_infeasible = true;
  DispatchOptions dopts;
  dopts.solver = opts;
  dopts.slack_penalty = slack_penalty;
  out.sol = solve_loose_with_fallback(model, s, z, xi, dopts, out.relaxed);
  if (out.sol.status == SolveStatus::kOptimal)
    out.indicator = in_tight_band(model.regions, out.sol.y.v) ? 0 : 1;
  return out;
}

}  // namespace dsim
