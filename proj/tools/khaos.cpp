/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "khaos/experiment.hpp"
#include "khaos/io.hpp"
#include "khaos/modeling.hpp"
#include "khaos/profiler.hpp"
#include "khaos/workload.hpp"

namespace fs = std::filesystem;
using namespace khaos;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct Globals {
  uint64_t seed = 1;
  fs::path out_dir = ".";
};

fs::path output_path(const Globals& g, const std::string& explicit_path, const char* default_name) {
  return explicit_path.empty() ? g.out_dir / default_name : fs::path(explicit_path);
}

WorkloadTrace load_trace(const fs::path& path) {
  std::istringstream in(io::read_file(path));
  try {
    return io::read_trace_csv(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void check(const Violations& v, const std::string& what) {
  if (!v.empty()) throw ParameterError(what + ": " + describe(v));
}

std::string to_csv(const auto& writer) {
  std::ostringstream out;
  writer(out);
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Checkpoint-interval optimizer with a discrete-event pipeline simulator"};
  app.require_subcommand(1);
  Globals g;
  std::string out_dir = ".";
  auto* seed_opt = app.add_option("--seed", g.seed, "Root seed");
  app.add_option("--out-dir", out_dir, "Directory for default output files");

  // generate-trace
  auto* gen = app.add_subcommand("generate-trace", "Synthesize a workload trace");
  workload::GeneratorParams gp;
  std::string gen_kind = "sinusoidal";
  std::string gen_out;
  gen->add_option("--kind", gen_kind, "sinusoidal | diurnal | random-walk | constant");
  gen->add_option("--duration", gp.duration_k, "Seconds");
  gen->add_option("--base", gp.base_rate, "Base rate (events/s)");
  gen->add_option("--amplitude", gp.amplitude, "Amplitude (events/s)");
  gen->add_option("--period", gp.period, "Cycle or day length in seconds (0 = default)");
  gen->add_option("--noise", gp.noise, "Relative per-second jitter");
  gen->add_option("--start", gp.start_time, "First timestamp");
  gen->add_option("--out", gen_out, "Trace CSV (default <out-dir>/trace.csv)");

  // phase1
  auto* p1 = app.add_subcommand("phase1", "Extract failure points from a trace");
  std::string p1_trace;
  size_t p1_m = 12;
  std::string p1_mode = "rate";
  int64_t p1_window = workload::kDefaultSmoothingWindow;
  std::string p1_out;
  p1->add_option("--trace", p1_trace, "Trace CSV")->required();
  p1->add_option("--m", p1_m, "Number of failure points");
  p1->add_option("--mode", p1_mode, "rate | time");
  p1->add_option("--window", p1_window, "Odd smoothing window (s)");
  p1->add_option("--out", p1_out, "Plan JSON (default <out-dir>/plan.json)");

  // profile
  auto* prof = app.add_subcommand("profile", "Profile every configuration at every failure point");
  std::string pr_trace;
  std::string pr_plan;
  std::string pr_grid = "10:120:5";
  std::string pr_spec;
  std::string pr_options;
  std::string pr_anchor;
  std::string pr_out;
  unsigned pr_threads = 0;
  prof->add_option("--trace", pr_trace, "Trace CSV")->required();
  prof->add_option("--plan", pr_plan, "Plan JSON")->required();
  prof->add_option("--grid", pr_grid, "min:max:z");
  prof->add_option("--spec", pr_spec, "PipelineSpec JSON (default: capacity twice the trace peak)");
  prof->add_option("--options", pr_options, "ProfilingOptions JSON");
  prof->add_option("--anchor", pr_anchor, "completion | start");
  prof->add_option("--threads", pr_threads, "Worker threads (0 = hardware)");
  prof->add_option("--out", pr_out, "Matrix JSON (default <out-dir>/matrix.json); a .csv is written beside it");

  // fit
  auto* fitc = app.add_subcommand("fit", "Fit latency and recovery models from a profiling matrix");
  std::string fit_matrix;
  int fit_degree = 2;
  fitc->add_option("--matrix", fit_matrix, "Matrix JSON")->required();
  fitc->add_option("--degree", fit_degree, "Polynomial degree (1 or 2)");

  // run-experiment
  auto* exp = app.add_subcommand("run-experiment", "Run Khaos and the static baselines on a scenario");
  std::string exp_scenario;
  exp->add_option("--scenario", exp_scenario, "Scenario JSON")->required();

  // report
  auto* rep = app.add_subcommand("report", "Normalize a report bundle against the Khaos run");
  std::string rep_bundle;
  rep->add_option("--bundle", rep_bundle, "Bundle directory (containing report.json)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  g.out_dir = out_dir;

  try {
    if (*gen) {
      gp.kind = workload::parse_trace_kind(gen_kind);
      gp.seed = g.seed;
      const auto trace = workload::generate_trace(gp);
      const auto path = output_path(g, gen_out, "trace.csv");
      io::write_file(path, to_csv([&](std::ostream& o) { io::write_trace_csv(o, trace); }));
      std::cout << "wrote " << path.string() << " (" << trace.duration_k() << " s)\n";
    } else if (*p1) {
      const auto trace = load_trace(p1_trace);
      check(validate(trace), "trace");
      const auto sw = workload::smooth(trace, p1_window);
      const auto plan = workload::extract_failure_points(sw, p1_m, workload::parse_failure_mode(p1_mode));
      const auto path = output_path(g, p1_out, "plan.json");
      io::save_json(path, plan);
      std::cout << "wrote " << path.string() << " (m = " << plan.m() << ")\n";
    } else if (*prof) {
      const auto trace = load_trace(pr_trace);
      check(validate(trace), "trace");
      const auto plan = io::load_json<FailurePlan>(pr_plan);
      check(validate(plan), "plan");
      const auto grid = ConfigGrid::parse(pr_grid);
      auto spec = pr_spec.empty() ? sim::PipelineSpec::defaults_for(trace) : io::load_json<sim::PipelineSpec>(pr_spec);
      check(sim::validate(spec), "spec");
      profiler::ProfilingOptions options;
      if (!pr_options.empty()) options = io::load_json<profiler::ProfilingOptions>(pr_options);
      if (!pr_anchor.empty()) {
        if (pr_anchor == "completion") options.anchor = profiler::InjectionAnchor::Completion;
        else if (pr_anchor == "start") options.anchor = profiler::InjectionAnchor::Start;
        else throw ParameterError("--anchor must be 'completion' or 'start'");
      }
      if (pr_threads != 0) options.threads = pr_threads;
      const auto matrix = profiler::run_profiling(trace, plan, grid, spec, options, g.seed);
      const auto path = output_path(g, pr_out, "matrix.json");
      io::save_json(path, matrix);
      auto csv_path = path;
      csv_path.replace_extension(".csv");
      const auto rows = profiler::flatten(matrix);
      io::write_file(csv_path, to_csv([&](std::ostream& o) { io::write_rows_csv(o, rows); }));
      std::cout << "wrote " << path.string() << " and " << csv_path.string() << " (" << matrix.invalid_cells()
                << " invalid cells)\n";
    } else if (*fitc) {
      const auto matrix = io::load_json<ProfilingMatrix>(fit_matrix);
      check(validate(matrix), "matrix");
      const auto models = experiment::fit_models(matrix, fit_degree);
      io::save_json(g.out_dir / "model_latency.json", models.latency);
      io::save_json(g.out_dir / "model_recovery.json", models.recovery);
      std::cout << "wrote " << (g.out_dir / "model_latency.json").string() << " and "
                << (g.out_dir / "model_recovery.json").string() << '\n';
    } else if (*exp) {
      auto scenario = io::load_json<experiment::Scenario>(exp_scenario);
      if (seed_opt->count() > 0) scenario.seed = g.seed;
      check(experiment::validate(scenario), "scenario");
      const auto result = experiment::run_experiment(scenario);
      experiment::write_bundle(result, g.out_dir);
      std::cout << experiment::report_table_csv(result.report);
    } else if (*rep) {
      const fs::path bundle(rep_bundle);
      const auto report = io::load_json<experiment::Report>(bundle / "report.json");
      std::vector<std::string> warnings;
      const auto csv = experiment::normalized_report_csv(report, warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
      io::write_file(g.out_dir / "normalized.csv", csv);
      std::cout << csv;
    }
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
