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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "khaos/domain.hpp"
#include "khaos/optimizer.hpp"
#include "khaos/pipeline_sim.hpp"
#include "khaos/profiler.hpp"
#include "khaos/workload.hpp"

namespace khaos::experiment {

/// Everything needed to reproduce one comparison of Khaos against static-CI baselines.
struct Scenario {
  std::string name = "scenario";
  uint64_t seed = 1;
  workload::GeneratorParams workload;  // its seed is replaced by derived sub-seeds
  sim::PipelineSpec spec;
  ConfigGrid grid = ConfigGrid::make(10.0, 120.0, 5);
  QoSConstraints constraints;
  size_t failure_points = 12;
  workload::FailureMode failure_mode = workload::FailureMode::RateEquidistant;
  int64_t smoothing_window = workload::kDefaultSmoothingWindow;
  profiler::ProfilingOptions profiling;
  int model_degree = 2;
  optimizer::ControlOptions optimizer;
  std::vector<double> baselines{10.0, 30.0, 60.0, 90.0, 120.0};
  double initial_ci = 60.0;
  size_t injections = 12;
  double injection_epsilon = 1.0;

  bool operator==(const Scenario&) const = default;
};

/// Field-addressed problems with a scenario.
Violations validate(const Scenario& scenario);

void to_json(nlohmann::json& j, const Scenario& v);
void from_json(const nlohmann::json& j, Scenario& v);

/// Sub-seed streams fanned out from the scenario seed.
enum class SeedStream : uint64_t { RecordingTrace = 1, Profiling = 2, ExperimentTrace = 3, Runs = 4 };
uint64_t sub_seed(const Scenario& scenario, SeedStream stream);

/// Nominal failure times spread evenly over the trace, away from both ends.
std::vector<double> nominal_failure_times(const WorkloadTrace& trace, size_t count);

struct RunSummary {
  std::string name;
  std::optional<double> static_ci;     // empty for the Khaos run
  double avg_latency = 0.0;            // ms
  double lat_violation_fraction = 0.0; // seconds above l_const / simulated seconds
  double recovery_time = 0.0;          // s, sum over injections
  double rec_violation_seconds = 0.0;  // s, sum of max(0, recovery - r_const)
  std::vector<double> injection_times;
  std::vector<double> recoveries;      // s, per injection
  size_t unrecovered = 0;              // injections still recovering at the end (counted to trace end)
  size_t reconfigurations = 0;

  bool operator==(const RunSummary&) const = default;
};

/// Ground-truth summary of one simulated run.
RunSummary summarize(const std::string& name, const sim::SimRun& run, double end_time,
                     const QoSConstraints& constraints, std::optional<double> static_ci, size_t reconfigurations);

struct Report {
  std::string scenario;
  uint64_t seed = 0;
  QoSConstraints constraints;
  double latency_model_error = 0.0;   // in-sample avg percent error
  double recovery_model_error = 0.0;
  size_t invalid_cells = 0;
  std::vector<RunSummary> runs;  // Khaos first, then baselines in scenario order

  bool operator==(const Report&) const = default;
};

void to_json(nlohmann::json& j, const RunSummary& v);
void from_json(const nlohmann::json& j, RunSummary& v);
void to_json(nlohmann::json& j, const Report& v);
void from_json(const nlohmann::json& j, Report& v);

struct Result {
  WorkloadTrace recording;
  FailurePlan plan;
  ProfilingMatrix matrix;
  optimizer::Models models;
  WorkloadTrace trace;
  std::vector<double> nominal_failures;
  std::vector<sim::SimRun> runs;  // same order as report.runs
  std::vector<optimizer::OptimizerDecision> decisions;
  Report report;
};

/// Models fitted on the valid cells of a profiling matrix.
optimizer::Models fit_models(const ProfilingMatrix& matrix, int degree);

/// Phases 1-3 plus the static baselines. Runs execute concurrently.
Result run_experiment(const Scenario& scenario);

/// Writes traces, plan, matrix, models, per-run metrics and events, the
/// decision log and report.json / report.csv under dir.
void write_bundle(const Result& result, const std::filesystem::path& dir);

/// `run,avg_latency,lat_violations,recovery_time,rec_violations,reconfigurations`.
std::string report_table_csv(const Report& report);

/// Latency-violation fractions and recovery figures normalized by the Khaos
/// row. Warnings (missing Khaos run, zero denominators) are appended to warnings.
std::string normalized_report_csv(const Report& report, std::vector<std::string>& warnings);

inline constexpr const char* kKhaosRun = "Khaos";

}  // namespace khaos::experiment
