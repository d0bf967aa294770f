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

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "khaos/anomaly.hpp"
#include "khaos/domain.hpp"
#include "khaos/modeling.hpp"
#include "khaos/optimizer.hpp"
#include "khaos/pipeline_sim.hpp"
#include "khaos/profiler.hpp"
#include "khaos/workload.hpp"

// JSON mappings. Data documents (traces, plans, matrices, models, runs) require
// every field; configuration documents fall back to defaults for missing keys
// and reject unknown ones.

namespace khaos {
void to_json(nlohmann::json& j, const WorkloadTrace& v);
void from_json(const nlohmann::json& j, WorkloadTrace& v);
void to_json(nlohmann::json& j, const FailurePoint& v);
void from_json(const nlohmann::json& j, FailurePoint& v);
void to_json(nlohmann::json& j, const FailurePlan& v);
void from_json(const nlohmann::json& j, FailurePlan& v);
void to_json(nlohmann::json& j, const ConfigGrid& v);
void from_json(const nlohmann::json& j, ConfigGrid& v);
void to_json(nlohmann::json& j, const QoSConstraints& v);
void from_json(const nlohmann::json& j, QoSConstraints& v);
void to_json(nlohmann::json& j, const MetricsSample& v);
void from_json(const nlohmann::json& j, MetricsSample& v);
void to_json(nlohmann::json& j, const ProfilingMatrix& v);
void from_json(const nlohmann::json& j, ProfilingMatrix& v);
}  // namespace khaos

namespace khaos::workload {
void to_json(nlohmann::json& j, const GeneratorParams& v);
void from_json(const nlohmann::json& j, GeneratorParams& v);
}  // namespace khaos::workload

namespace khaos::sim {
void to_json(nlohmann::json& j, const PipelineSpec& v);
void from_json(const nlohmann::json& j, PipelineSpec& v);
void to_json(nlohmann::json& j, const SimEvent& v);
void from_json(const nlohmann::json& j, SimEvent& v);
void to_json(nlohmann::json& j, const SimRun& v);
void from_json(const nlohmann::json& j, SimRun& v);
}  // namespace khaos::sim

namespace khaos::anomaly {
void to_json(nlohmann::json& j, const DetectorConfig& v);
void from_json(const nlohmann::json& j, DetectorConfig& v);
void to_json(nlohmann::json& j, const AnomalyInterval& v);
void from_json(const nlohmann::json& j, AnomalyInterval& v);
}  // namespace khaos::anomaly

namespace khaos::profiler {
void to_json(nlohmann::json& j, const ProfilingOptions& v);
void from_json(const nlohmann::json& j, ProfilingOptions& v);
}  // namespace khaos::profiler

namespace khaos::modeling {
void to_json(nlohmann::json& j, const RegressionModel& v);
void from_json(const nlohmann::json& j, RegressionModel& v);
void to_json(nlohmann::json& j, const ForecastOptions& v);
void from_json(const nlohmann::json& j, ForecastOptions& v);
}  // namespace khaos::modeling

namespace khaos::optimizer {
void to_json(nlohmann::json& j, const OptimizerDecision& v);
void from_json(const nlohmann::json& j, OptimizerDecision& v);
void to_json(nlohmann::json& j, const ControlOptions& v);
void from_json(const nlohmann::json& j, ControlOptions& v);
}  // namespace khaos::optimizer

namespace khaos::io {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// `timestamp,count` rows, one per second.
void write_trace_csv(std::ostream& out, const WorkloadTrace& trace);
WorkloadTrace read_trace_csv(std::istream& in);

/// `t,input_throughput,consumer_lag,avg_latency` rows.
void write_metrics_csv(std::ostream& out, std::span<const MetricsSample> metrics);
std::vector<MetricsSample> read_metrics_csv(std::istream& in);

/// `rate,ci,latency,recovery` rows; missing cells are empty fields.
void write_rows_csv(std::ostream& out, std::span<const profiler::ProfilingRow> rows);
std::vector<profiler::ProfilingRow> read_rows_csv(std::istream& in);

/// One compact JSON document per line.
void write_decision_log(std::ostream& out, std::span<const optimizer::OptimizerDecision> decisions);
std::vector<optimizer::OptimizerDecision> read_decision_log(std::istream& in);

std::string read_file(const std::filesystem::path& path);
/// Writes the file, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& content);

/// Parses a JSON document; nlohmann errors are rethrown as FormatError.
nlohmann::json parse_json(const std::string& text, const std::string& origin = "document");
/// Two-space indented document with a trailing newline.
std::string dump_json(const nlohmann::json& j);

template <typename T>
T from_json_checked(const nlohmann::json& j, const std::string& origin = "document") {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(origin + ": " + e.what());
  }
}

template <typename T>
T load_json(const std::filesystem::path& path) {
  return from_json_checked<T>(parse_json(read_file(path), path.string()), path.string());
}

template <typename T>
void save_json(const std::filesystem::path& path, const T& value) {
  write_file(path, dump_json(nlohmann::json(value)));
}

}  // namespace khaos::io
