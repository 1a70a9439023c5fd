#include "dsim/evaluate.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

namespace dsim {

int env_thread_cap() {
  const char* env = std::getenv("DISPATCH_THREADS");
  if (!env) return 0;
  const int v = std::atoi(env);
  return v > 0 ? v : 0;
}

namespace {

struct SampleResult {
  double slot_cost = 0.0;
  Vec v;
  bool violation = false;
  std::vector<uint8_t> bus_violation;
  double hard_residual = 0.0;
  bool relaxed = false;
  bool tight_infeasible = false;
  bool failed = false;
};

/// Worst residual of the hard voltage band and the inverter feasible set.
double hard_residual(const FeederModel& model, const Scenario& xi, const FastDecision& y) {
  double worst = 0.0;
  for (int i = 0; i < y.v.size(); ++i) {
    worst = std::max(worst, model.regions.vb_min - y.v[i]);
    worst = std::max(worst, y.v[i] - model.regions.vb_max);
  }
  for (size_t u = 0; u < model.pv_units.size(); ++u) {
    const PvUnit& pv = model.pv_units[u];
    const int k = int(u);
    worst = std::max(worst, -y.p_r[k]);
    worst = std::max(worst, y.p_r[k] - xi.solar_avail_mw[k]);
    worst = std::max(worst, std::abs(y.q_r[k]) - pv.phi() * y.p_r[k]);
    worst = std::max(worst, y.p_r[k] * y.p_r[k] + y.q_r[k] * y.q_r[k] -
                               pv.inverter_mva * pv.inverter_mva);
  }
  return worst;
}

}  // namespace

EvalReport monte_carlo_eval(const FeederModel& model, const SensitivityBundle& s,
                            const ScenarioSpec& spec, Algorithm algorithm,
                            const SlowDecision& z, const Vec& nu,
                            const EvalOptions& opts) {
  if (opts.n_samples < 1)
    throw std::invalid_argument("monte_carlo_eval: n_samples must be >= 1");
  const int n = model.n();
  const int count = opts.n_samples;

  std::vector<SampleResult> results(static_cast<size_t>(count));
  std::atomic<uint64_t> truncations{0};

  auto evaluate_one = [&](int i) {
    RngStream rng = make_stream(opts.seed, RngPurpose::kEvaluation, uint64_t(i));
    const Scenario xi = sample(spec, rng, &truncations);
    PolicyOutcome out;
    switch (algorithm) {
      case Algorithm::kAda:
      case Algorithm::kApproxAvg:
        out = fast_policy_avg(model, s, z, nu, xi, opts.solver, opts.slack_penalty);
        break;
      case Algorithm::kPda:
      case Algorithm::kApproxProb:
        out = fast_policy_prob(model, s, z, nu.size() ? nu[0] : 0.0, xi, opts.solver,
                               opts.slack_penalty);
        break;
      case Algorithm::kDeterministic:
        out = fast_policy_tight(model, s, z, xi, opts.solver, opts.slack_penalty);
        break;
    }
    SampleResult& r = results[size_t(i)];
    if (out.sol.status != SolveStatus::kOptimal) {
      r.failed = true;
      return;
    }
    r.slot_cost = out.sol.slot_cost;
    r.v = out.sol.y.v;
    r.bus_violation.resize(size_t(n));
    bool any = false;
    for (int b = 0; b < n; ++b) {
      const bool viol =
          r.v[b] < model.regions.va_min || r.v[b] > model.regions.va_max;
      r.bus_violation[size_t(b)] = viol;
      any = any || viol;
    }
    r.violation = any;
    r.hard_residual = hard_residual(model, xi, out.sol.y);
    r.relaxed = out.relaxed;
    r.tight_infeasible = out.tight_infeasible;
  };

  int threads = opts.threads > 0 ? opts.threads : int(std::thread::hardware_concurrency());
  const int cap = env_thread_cap();
  if (cap > 0) threads = std::min(threads, cap);
  threads = std::max(1, std::min(threads, count));

  if (threads == 1) {
    for (int i = 0; i < count; ++i) evaluate_one(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(size_t(threads));
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) evaluate_one(i);
      });
    for (std::thread& t : pool) t.join();
  }

  // Deterministic reduction in sample order.
  EvalReport rep;
  rep.n_samples = count;
  rep.seed = opts.seed;
  rep.hist_buses = opts.hist_buses;
  if (rep.hist_buses.empty())
    for (const PvUnit& pv : model.pv_units) rep.hist_buses.push_back(pv.bus);

  const double lo = std::sqrt(model.regions.vb_min) - opts.hist_margin;
  const double hi = std::sqrt(model.regions.vb_max) + opts.hist_margin;
  rep.hist_edges.resize(opts.n_bins + 1);
  for (int b = 0; b <= opts.n_bins; ++b)
    rep.hist_edges[b] = lo + (hi - lo) * double(b) / opts.n_bins;
  rep.histograms = Mat::Zero(opts.n_bins, int(rep.hist_buses.size()));

  rep.mean_voltage = Vec::Zero(n);
  rep.violation_prob_per_bus = Vec::Zero(n);
  rep.sample_costs.reserve(size_t(count));
  double cost_sum = 0.0, cost_sq_sum = 0.0, cost_comp = 0.0;
  int64_t ok_count = 0, violations = 0;
  for (const SampleResult& r : results) {
    if (r.failed) {
      ++rep.failures;
      continue;
    }
    ++ok_count;
    // Kahan-compensated total so the mean does not drift with sample count.
    const double yv = r.slot_cost - cost_comp;
    const double tv = cost_sum + yv;
    cost_comp = (tv - cost_sum) - yv;
    cost_sum = tv;
    cost_sq_sum += r.slot_cost * r.slot_cost;
    rep.sample_costs.push_back(r.slot_cost);
    rep.mean_voltage += r.v;
    if (r.violation) ++violations;
    for (int b = 0; b < n; ++b)
      if (r.bus_violation[size_t(b)]) rep.violation_prob_per_bus[b] += 1.0;
    for (size_t h = 0; h < rep.hist_buses.size(); ++h) {
      const double mag = std::sqrt(std::max(0.0, r.v[rep.hist_buses[h] - 1]));
      int bin = int((mag - lo) / (hi - lo) * opts.n_bins);
      bin = std::max(0, std::min(opts.n_bins - 1, bin));
      rep.histograms(bin, int(h)) += 1.0;
    }
    rep.hard_violation_max = std::max(rep.hard_violation_max, r.hard_residual);
    if (r.relaxed) ++rep.counters.slack_events;
    if (r.tight_infeasible) ++rep.counters.tight_infeasible;
  }
  rep.counters.skips = rep.failures;
  if (rep.failures * 100 > count)
    throw std::runtime_error("monte_carlo_eval: more than 1% of slot solves failed");
  if (ok_count == 0) throw std::runtime_error("monte_carlo_eval: no successful samples");

  rep.mean_slot_cost = cost_sum / double(ok_count);
  const double var =
      std::max(0.0, cost_sq_sum / double(ok_count) - rep.mean_slot_cost * rep.mean_slot_cost);
  rep.cost_stderr = std::sqrt(var / double(ok_count));
  rep.slow_cost_part = slow_cost(model, z);
  rep.expected_cost = rep.slow_cost_part + rep.mean_slot_cost;
  rep.mean_voltage /= double(ok_count);
  rep.violation_prob_overall = double(violations) / double(ok_count);
  rep.violation_prob_per_bus /= double(ok_count);
  return rep;
}

}  // namespace dsim
