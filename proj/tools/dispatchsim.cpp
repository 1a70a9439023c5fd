#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "dsim/config.hpp"

using namespace dsim;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string output_dir;
  std::optional<uint64_t> seed;
  std::optional<std::string> algorithm;
  std::optional<int> max_iters;
  std::optional<double> alpha;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "run configuration file")->required();
  cmd->add_option("--out", f.output_dir, "output directory (overrides config)");
  cmd->add_option("--seed", f.seed, "RNG seed (overrides config)");
  cmd->add_option("--algorithm", f.algorithm, "algorithm (overrides config)");
  cmd->add_option("--max-iters", f.max_iters, "iteration cap (overrides config)");
  cmd->add_option("--alpha", f.alpha, "violation probability target (overrides config)");
  cmd->add_option("--threads", f.threads, "evaluation worker threads");
}

RunConfig load_with_overrides(const CommonFlags& f) {
  RunConfig c = load_config(f.config_path);
  if (f.algorithm) c.algorithm = parse_algorithm(*f.algorithm);
  if (f.seed) c.seed = *f.seed;
  if (!f.output_dir.empty()) c.output_dir = f.output_dir;
  if (f.max_iters) c.stop.max_iters = *f.max_iters;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.threads) c.threads = *f.threads;
  const bool probabilistic =
      c.algorithm == Algorithm::kPda || c.algorithm == Algorithm::kApproxProb;
  if (probabilistic && !c.alpha)
    throw FeederError("alpha required for algorithm '" +
                      std::string(algorithm_name(c.algorithm)) + "'");
  return c;
}

double trace_cost_estimate(const FeederModel& model, const RunTrace& trace,
                           int window) {
  if (trace.records.empty()) return slow_cost(model, trace.z_star);
  double sum = 0.0;
  int count = 0;
  const int start = std::max(0, int(trace.records.size()) - window);
  for (size_t k = size_t(start); k < trace.records.size(); ++k, ++count)
    sum += trace.records[k].slot_cost;
  return slow_cost(model, trace.z_star) + sum / std::max(1, count);
}

int cmd_run(const CommonFlags& flags) {
  RunConfig config = load_with_overrides(flags);
  FeederModel model = load_configured_feeder(config);
  SensitivityBundle s = build_sensitivity(model);
  ScenarioSpec spec = scenario_spec(config, model);
  ScenarioSource source(spec, RngPurpose::kTraining);
  if (config.empirical_pool > 0) source.use_pool(config.empirical_pool);

  DispatchOptions opts = config.dispatch_options();
  RunTrace trace;
  switch (config.algorithm) {
    case Algorithm::kAda:
      trace = ada_run(model, s, source, opts);
      break;
    case Algorithm::kPda:
      trace = pda_run(model, s, source, opts);
      break;
    default:
      trace = baseline_run(model, s, source, config.algorithm, opts);
      break;
  }

  ensure_directory(config.output_dir);
  write_trace_csv(config.output_dir + "/trace.csv", model, config.algorithm, trace);

  RunSummary summary;
  summary.algorithm = algorithm_name(config.algorithm);
  summary.feeder = config.feeder_path;
  summary.seed = config.seed;
  summary.z = trace.z_star;
  summary.nu = trace.nu_star;
  summary.converged = trace.converged;
  summary.iterations = trace.iterations;
  summary.cost_estimate = trace_cost_estimate(model, trace, config.stop.window);
  summary.counters = trace.counters;
  summary.alpha = config.alpha.value_or(0.0);
  write_summary(config.output_dir + "/summary.json", summary);

  std::cout << algorithm_name(config.algorithm) << ": "
            << (trace.converged ? "converged" : "hit iteration cap") << " after "
            << trace.iterations << " iterations; cost estimate "
            << summary.cost_estimate << " $/h\n"
            << "outputs in " << config.output_dir << "\n";
  return trace.converged ? 0 : 2;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& summary_path,
                 int n_samples) {
  RunConfig config = load_with_overrides(flags);
  if (n_samples > 0) config.eval_samples = n_samples;
  if (config.eval_samples < 1) throw FeederError("evaluate: n_samples must be >= 1");
  FeederModel model = load_configured_feeder(config);
  SensitivityBundle s = build_sensitivity(model);
  ScenarioSpec spec = scenario_spec(config, model);

  const std::string spath =
      summary_path.empty() ? config.output_dir + "/summary.json" : summary_path;
  RunSummary summary = read_summary(spath);
  const Algorithm algorithm = parse_algorithm(summary.algorithm);

  EvalReport report = monte_carlo_eval(model, s, spec, algorithm, summary.z,
                                       summary.nu, config.eval_options());
  ensure_directory(config.output_dir);
  write_eval_json(config.output_dir + "/eval.json", report);
  write_histograms_csv(config.output_dir, report);
  write_perbus_csv(config.output_dir + "/perbus_violations.csv", report);

  std::cout << summary.algorithm << " over " << report.n_samples
            << " samples: expected cost " << report.expected_cost << " +/- "
            << report.cost_stderr << " $/h, violation probability "
            << report.violation_prob_overall << "\n"
            << "outputs in " << config.output_dir << "\n";
  return 0;
}

int cmd_oracle(const CommonFlags& flags, int n_scenarios) {
  RunConfig config = load_with_overrides(flags);
  if (n_scenarios < 1) throw FeederError("oracle: scenario count must be >= 1");
  FeederModel model = load_configured_feeder(config);
  SensitivityBundle s = build_sensitivity(model);
  ScenarioSpec spec = scenario_spec(config, model);
  ScenarioSource source(spec, RngPurpose::kScenarioPool);
  source.use_pool(n_scenarios);

  SaaResult res = saa_oracle(model, s, source.pool(), config.solver, config.p0a_min,
                             config.p0a_max);
  if (res.status != SolveStatus::kOptimal)
    throw FeederError(std::string("oracle: program ") + solve_status_name(res.status));

  ensure_directory(config.output_dir);
  nlohmann::json j;
  j["scenarios"] = n_scenarios;
  j["seed"] = config.seed;
  j["cost"] = res.cost;
  j["z"] = {{"v0a", res.z.v0a}, {"p0a", res.z.p0a}};
  for (int d = 0; d < res.z.p_d.size(); ++d) j["z"]["p_d"].push_back(res.z.p_d[d]);
  std::ofstream out(config.output_dir + "/oracle.json");
  out << std::setprecision(17) << j.dump(2) << "\n";

  std::cout << "oracle over " << n_scenarios << " scenarios: cost " << res.cost
            << " $/h, v0a " << res.z.v0a << ", p0a " << res.z.p0a << "\n"
            << "outputs in " << config.output_dir << "\n";
  return 0;
}

int cmd_scenario_dump(const CommonFlags& flags, int count, const std::string& out_path) {
  RunConfig config = load_with_overrides(flags);
  if (count < 1) throw FeederError("scenario-dump: count must be >= 1");
  FeederModel model = load_configured_feeder(config);
  ScenarioSpec spec = scenario_spec(config, model);
  ScenarioSource source(spec, RngPurpose::kScenarioPool);
  source.use_pool(count);
  const std::string path =
      out_path.empty() ? config.output_dir + "/scenarios.csv" : out_path;
  if (out_path.empty()) ensure_directory(config.output_dir);
  write_scenarios_csv(path, model, source.pool());
  std::cout << "wrote " << count << " scenarios to " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-timescale feeder dispatch simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags, eval_flags, oracle_flags, dump_flags;

  CLI::App* run = app.add_subcommand("run", "train a dispatch policy");
  add_common(run, run_flags);

  CLI::App* eval = app.add_subcommand("evaluate", "Monte-Carlo evaluation of a run");
  add_common(eval, eval_flags);
  std::string summary_path;
  int n_samples = 0;
  eval->add_option("--summary", summary_path, "summary.json from a prior run");
  eval->add_option("--samples", n_samples, "number of Monte-Carlo samples");

  CLI::App* oracle = app.add_subcommand("oracle", "sample-average reference solve");
  add_common(oracle, oracle_flags);
  int n_scenarios = 50;
  oracle->add_option("--scenarios", n_scenarios, "size of the fixed scenario set");

  CLI::App* dump = app.add_subcommand("scenario-dump", "write sampled scenarios as CSV");
  add_common(dump, dump_flags);
  int dump_count = 100;
  std::string dump_path;
  dump->add_option("--count", dump_count, "number of scenarios");
  dump->add_option("--file", dump_path, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (eval->parsed()) return cmd_evaluate(eval_flags, summary_path, n_samples);
    if (oracle->parsed()) return cmd_oracle(oracle_flags, n_scenarios);
    if (dump->parsed()) return cmd_scenario_dump(dump_flags, dump_count, dump_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
