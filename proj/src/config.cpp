#include "dsim/config.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace dsim {

using nlohmann::json;

DispatchOptions RunConfig::dispatch_options() const {
  DispatchOptions d;
  d.steps = steps;
  d.stop = stop;
  d.solver = solver;
  d.alpha = alpha.value_or(0.05);
  d.p0a_min = p0a_min;
  d.p0a_max = p0a_max;
  d.slack_penalty = slack_penalty;
  return d;
}

EvalOptions RunConfig::eval_options() const {
  EvalOptions e;
  e.n_samples = eval_samples;
  e.seed = seed;
  e.solver = solver;
  e.slack_penalty = slack_penalty;
  e.threads = threads;
  e.hist_buses = hist_buses;
  return e;
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "ada") return Algorithm::kAda;
  if (name == "pda") return Algorithm::kPda;
  if (name == "approx_avg") return Algorithm::kApproxAvg;
  if (name == "approx_prob") return Algorithm::kApproxProb;
  if (name == "deterministic") return Algorithm::kDeterministic;
  throw FeederError("config: unknown algorithm '" + name +
                    "' (expected ada|pda|approx_avg|approx_prob|deterministic)");
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FeederError(path + ": cannot open config file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FeederError(path + ": parse error: " + e.what());
  }

  RunConfig c;
  if (!j.contains("feeder") || !j["feeder"].is_string())
    throw FeederError(path + ": missing 'feeder' path");
  c.feeder_path = j["feeder"].get<std::string>();
  // Relative feeder paths resolve against the config's directory.
  const auto base = std::filesystem::path(path).parent_path();
  if (!c.feeder_path.empty() && c.feeder_path[0] != '/')
    c.feeder_path = (base / c.feeder_path).string();

  c.algorithm = parse_algorithm(j.value("algorithm", "ada"));
  c.seed = j.value("seed", uint64_t(0));
  if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();

  if (j.contains("scenario")) {
    const json& s = j["scenario"];
    c.load_scale = s.value("load_scale", 1.0);
    c.load_std_factor = s.value("load_std_factor", 0.2);
    c.solar_low_factor = s.value("solar_low_factor", 0.5);
    c.solar_high_factor = s.value("solar_high_factor", 1.0);
  }

  const bool probabilistic =
      c.algorithm == Algorithm::kPda || c.algorithm == Algorithm::kApproxProb;
  if (j.contains("steps")) {
    const json& s = j["steps"];
    c.steps.eps_v0 = s.value("eps_v0", c.steps.eps_v0);
    c.steps.eps_p0 = s.value("eps_p0", c.steps.eps_p0);
    c.steps.eps_pd = s.value("eps_pd", c.steps.eps_pd);
    c.steps.mu = s.value("mu", probabilistic ? 1.0 : 225.0);
  } else if (probabilistic) {
    c.steps.mu = 1.0;
  }

  if (j.contains("stop")) {
    const json& s = j["stop"];
    c.stop.max_iters = s.value("max_iters", c.stop.max_iters);
    c.stop.window = s.value("window", c.stop.window);
    c.stop.rel_tol = s.value("rel_tol", c.stop.rel_tol);
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    c.solver.feas_tol = s.value("feas_tol", c.solver.feas_tol);
    c.solver.gap_tol = s.value("gap_tol", c.solver.gap_tol);
    c.solver.max_iters = s.value("max_iters", c.solver.max_iters);
  }

  if (j.contains("pi")) c.pi = j["pi"].get<double>();
  c.p0a_min = j.value("p0a_min", 0.0);
  c.p0a_max = j.value("p0a_max", 0.0);
  c.empirical_pool = j.value("empirical_pool", 0);
  c.slack_penalty = j.value("slack_penalty", 1e4);
  c.output_dir = j.value("output_dir", "out");
  c.eval_samples = j.value("eval_samples", 6000);
  c.threads = j.value("threads", 0);
  if (j.contains("hist_buses"))
    for (const auto& b : j["hist_buses"]) c.hist_buses.push_back(b.get<int>());

  if (probabilistic && !c.alpha)
    throw FeederError(path + ": alpha required for algorithm '" +
                      std::string(algorithm_name(c.algorithm)) + "'");
  if (c.alpha && !(*c.alpha > 0.0 && *c.alpha < 1.0))
    throw FeederError(path + ": alpha must lie in (0, 1)");
  if (c.eval_samples < 0) throw FeederError(path + ": eval_samples must be nonnegative");
  return c;
}

FeederModel load_configured_feeder(const RunConfig& config) {
  FeederModel model = load_feeder(config.feeder_path);
  if (config.pi)
    for (double& pi : model.prices.pv_surplus) pi = *config.pi;
  return model;
}

ScenarioSpec scenario_spec(const RunConfig& config, const FeederModel& model) {
  ScenarioSpec spec = ScenarioSpec::from_model(model, config.load_scale, config.seed);
  spec.load_std_factor = config.load_std_factor;
  spec.solar_low_factor = config.solar_low_factor;
  spec.solar_high_factor = config.solar_high_factor;
  spec.validate();
  return spec;
}

void ensure_directory(const std::string& path) {
  std::filesystem::create_directories(path);
}

namespace {
json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const json& a) {
  Vec v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[int(i)] = a[i].get<double>();
  return v;
}
}  // namespace

void write_summary(const std::string& path, const RunSummary& s) {
  json j;
  j["schema_version"] = s.schema_version;
  j["algorithm"] = s.algorithm;
  j["feeder"] = s.feeder;
  j["seed"] = s.seed;
  j["z"] = {{"v0a", s.z.v0a}, {"p0a", s.z.p0a}, {"p_d", vec_to_json(s.z.p_d)}};
  j["nu"] = vec_to_json(s.nu);
  j["converged"] = s.converged;
  j["iterations"] = s.iterations;
  j["cost_estimate"] = s.cost_estimate;
  j["alpha"] = s.alpha;
  j["counters"] = {{"slack_events", s.counters.slack_events},
                   {"skips", s.counters.skips},
                   {"tight_infeasible", s.counters.tight_infeasible}};
  std::ofstream out(path);
  if (!out) throw FeederError(path + ": cannot write summary");
  out << std::setprecision(17) << j.dump(2) << "\n";
}

RunSummary read_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FeederError(path + ": cannot open summary");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FeederError(path + ": parse error: " + e.what());
  }
  RunSummary s;
  s.schema_version = j.value("schema_version", -1);
  if (s.schema_version != kSummarySchemaVersion)
    throw FeederError(path + ": summary schema version " +
                      std::to_string(s.schema_version) + " does not match expected " +
                      std::to_string(kSummarySchemaVersion));
  s.algorithm = j.at("algorithm").get<std::string>();
  s.feeder = j.value("feeder", "");
  s.seed = j.value("seed", uint64_t(0));
  s.z.v0a = j.at("z").at("v0a").get<double>();
  s.z.p0a = j.at("z").at("p0a").get<double>();
  s.z.p_d = vec_from_json(j.at("z").at("p_d"));
  s.nu = vec_from_json(j.at("nu"));
  s.converged = j.value("converged", false);
  s.iterations = j.value("iterations", 0);
  s.cost_estimate = j.value("cost_estimate", 0.0);
  s.alpha = j.value("alpha", 0.0);
  return s;
}

void write_trace_csv(const std::string& path, const FeederModel& model,
                     Algorithm algorithm, const RunTrace& trace) {
  std::ofstream out(path);
  if (!out) throw FeederError(path + ": cannot write trace");
  out << std::setprecision(17);

  const int n = model.n();
  const bool scalar_nu = algorithm == Algorithm::kPda || algorithm == Algorithm::kApproxProb;
  out << "iter,v0a,p0a";
  for (const DieselUnit& d : model.diesel_units) out << ",pd_bus" << d.bus;
  if (scalar_nu) {
    out << ",nu";
  } else {
    for (int i = 1; i <= n; ++i) out << ",nu_lo_" << i;
    for (int i = 1; i <= n; ++i) out << ",nu_up_" << i;
  }
  out << ",avg_v0a,avg_p0a";
  for (const DieselUnit& d : model.diesel_units) out << ",avg_pd_bus" << d.bus;
  if (scalar_nu) {
    out << ",avg_nu";
  } else {
    for (int i = 1; i <= n; ++i) out << ",avg_nu_lo_" << i;
    for (int i = 1; i <= n; ++i) out << ",avg_nu_up_" << i;
  }
  out << ",slot_cost,status,indicator\n";

  for (size_t k = 0; k < trace.records.size(); ++k) {
    const IterationRecord& r = trace.records[k];
    out << (k + 1) << "," << r.z.v0a << "," << r.z.p0a;
    for (int d = 0; d < r.z.p_d.size(); ++d) out << "," << r.z.p_d[d];
    for (int i = 0; i < r.nu.size(); ++i) out << "," << r.nu[i];
    out << "," << r.z_avg.v0a << "," << r.z_avg.p0a;
    for (int d = 0; d < r.z_avg.p_d.size(); ++d) out << "," << r.z_avg.p_d[d];
    for (int i = 0; i < r.nu_avg.size(); ++i) out << "," << r.nu_avg[i];
    out << "," << r.slot_cost << "," << solve_status_name(r.status) << ","
        << r.indicator << "\n";
  }
}

void write_eval_json(const std::string& path, const EvalReport& rep) {
  json j;
  j["n_samples"] = rep.n_samples;
  j["seed"] = rep.seed;
  j["expected_cost"] = rep.expected_cost;
  j["cost_stderr"] = rep.cost_stderr;
  j["slow_cost"] = rep.slow_cost_part;
  j["mean_slot_cost"] = rep.mean_slot_cost;
  j["mean_voltage"] = vec_to_json(rep.mean_voltage);
  j["violation_prob_overall"] = rep.violation_prob_overall;
  j["violation_prob_per_bus"] = vec_to_json(rep.violation_prob_per_bus);
  j["hard_violation_max"] = rep.hard_violation_max;
  j["failures"] = rep.failures;
  j["counters"] = {{"slack_events", rep.counters.slack_events},
                   {"skips", rep.counters.skips},
                   {"tight_infeasible", rep.counters.tight_infeasible}};
  std::ofstream out(path);
  if (!out) throw FeederError(path + ": cannot write report");
  out << std::setprecision(17) << j.dump(2) << "\n";
}

void write_histograms_csv(const std::string& dir, const EvalReport& rep) {
  for (size_t h = 0; h < rep.hist_buses.size(); ++h) {
    const std::string path = dir + "/hist_bus" + std::to_string(rep.hist_buses[h]) + ".csv";
    std::ofstream out(path);
    if (!out) throw FeederError(path + ": cannot write histogram");
    out << std::setprecision(17) << "bin_low,bin_high,count\n";
    for (int b = 0; b < rep.histograms.rows(); ++b)
      out << rep.hist_edges[b] << "," << rep.hist_edges[b + 1] << ","
          << rep.histograms(b, int(h)) << "\n";
  }
}

void write_perbus_csv(const std::string& path, const EvalReport& rep) {
  std::ofstream out(path);
  if (!out) throw FeederError(path + ": cannot write per-bus report");
  out << std::setprecision(17) << "bus,violation_prob,mean_voltage_sqpu\n";
  for (int b = 0; b < rep.violation_prob_per_bus.size(); ++b)
    out << (b + 1) << "," << rep.violation_prob_per_bus[b] << ","
        << rep.mean_voltage[b] << "\n";
}

void write_scenarios_csv(const std::string& path, const FeederModel& model,
                         const std::vector<Scenario>& scenarios) {
  std::ofstream out(path);
  if (!out) throw FeederError(path + ": cannot write scenarios");
  out << std::setprecision(17) << "sample";
  for (int i = 1; i <= model.n(); ++i) out << ",p_load_" << i;
  for (int i = 1; i <= model.n(); ++i) out << ",q_load_" << i;
  for (size_t u = 0; u < model.pv_units.size(); ++u)
    out << ",solar_bus" << model.pv_units[u].bus;
  out << "\n";
  for (size_t k = 0; k < scenarios.size(); ++k) {
    const Scenario& s = scenarios[k];
    out << k;
    for (int i = 0; i < s.p_load_mw.size(); ++i) out << "," << s.p_load_mw[i];
    for (int i = 0; i < s.q_load_mvar.size(); ++i) out << "," << s.q_load_mvar[i];
    for (int i = 0; i < s.solar_avail_mw.size(); ++i) out << "," << s.solar_avail_mw[i];
    out << "\n";
  }
}

}  // namespace dsim
