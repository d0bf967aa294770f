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

#include "khaos/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

using nlohmann::json;

namespace khaos {

namespace {

void require_keys(const json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw FormatError(std::string(what) + " must be a JSON object");
  for (const char* key : keys) {
    if (!j.contains(key)) throw FormatError(std::string(what) + ": missing field '" + key + "'");
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw FormatError(std::string(what) + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; }) == keys.end()) {
      throw FormatError(std::string(what) + ": unknown field '" + item.key() + "'");
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

json optional_matrix(const std::vector<std::vector<std::optional<double>>>& m) {
  json out = json::array();
  for (const auto& row : m) {
    json r = json::array();
    for (const auto& cell : row) r.push_back(cell ? json(*cell) : json(nullptr));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::vector<std::optional<double>>> read_optional_matrix(const json& j) {
  std::vector<std::vector<std::optional<double>>> out;
  for (const auto& row : j) {
    auto& r = out.emplace_back();
    for (const auto& cell : row) {
      if (cell.is_null()) r.emplace_back();
      else r.emplace_back(cell.get<double>());
    }
  }
  return out;
}

}  // namespace

void to_json(json& j, const WorkloadTrace& v) {
  j = json{{"start_time", v.start_time}, {"duration_k", v.duration_k()}, {"counts", v.counts}};
}

void from_json(const json& j, WorkloadTrace& v) {
  require_keys(j, {"start_time", "counts"}, "WorkloadTrace");
  j.at("start_time").get_to(v.start_time);
  j.at("counts").get_to(v.counts);
  if (j.contains("duration_k") && j.at("duration_k").get<int64_t>() != v.duration_k()) {
    throw FormatError("WorkloadTrace: duration_k does not match the number of counts");
  }
}

void to_json(json& j, const FailurePoint& v) { j = json{{"timestamp", v.timestamp}, {"rate", v.rate}}; }

void from_json(const json& j, FailurePoint& v) {
  require_keys(j, {"timestamp", "rate"}, "FailurePoint");
  j.at("timestamp").get_to(v.timestamp);
  j.at("rate").get_to(v.rate);
}

void to_json(json& j, const FailurePlan& v) { j = json{{"m", v.m()}, {"points", v.points}}; }

void from_json(const json& j, FailurePlan& v) {
  require_keys(j, {"points"}, "FailurePlan");
  j.at("points").get_to(v.points);
  if (j.contains("m") && j.at("m").get<size_t>() != v.m()) {
    throw FormatError("FailurePlan: m does not match the number of points");
  }
}

void to_json(json& j, const ConfigGrid& v) {
  j = json{{"ci_min", v.ci_min}, {"ci_max", v.ci_max}, {"z", v.z()}, {"values", v.values}};
}

void from_json(const json& j, ConfigGrid& v) {
  if (j.is_string()) {
    v = ConfigGrid::parse(j.get<std::string>());
    return;
  }
  require_keys(j, {"ci_min", "ci_max", "z"}, "ConfigGrid");
  if (j.contains("values")) {
    j.at("ci_min").get_to(v.ci_min);
    j.at("ci_max").get_to(v.ci_max);
    j.at("values").get_to(v.values);
    if (j.at("z").get<size_t>() != v.z()) throw FormatError("ConfigGrid: z does not match the number of values");
  } else {
    v = ConfigGrid::make(j.at("ci_min").get<double>(), j.at("ci_max").get<double>(), j.at("z").get<size_t>());
  }
}

void to_json(json& j, const QoSConstraints& v) { j = json{{"l_const", v.l_const}, {"r_const", v.r_const}}; }

void from_json(const json& j, QoSConstraints& v) {
  reject_unknown(j, {"l_const", "r_const"}, "QoSConstraints");
  read_opt(j, "l_const", v.l_const);
  read_opt(j, "r_const", v.r_const);
}

void to_json(json& j, const MetricsSample& v) {
  j = json{{"t", v.t},
           {"input_throughput", v.input_throughput},
           {"consumer_lag", v.consumer_lag},
           {"avg_latency", v.avg_latency}};
}

void from_json(const json& j, MetricsSample& v) {
  require_keys(j, {"t", "input_throughput", "consumer_lag", "avg_latency"}, "MetricsSample");
  j.at("t").get_to(v.t);
  j.at("input_throughput").get_to(v.input_throughput);
  j.at("consumer_lag").get_to(v.consumer_lag);
  j.at("avg_latency").get_to(v.avg_latency);
}

void to_json(json& j, const ProfilingMatrix& v) {
  j = json{{"latencies", optional_matrix(v.latencies)},
           {"recoveries", optional_matrix(v.recoveries)},
           {"invalid_reasons", v.invalid_reasons},
           {"grid", v.grid},
           {"plan", v.plan}};
}

void from_json(const json& j, ProfilingMatrix& v) {
  require_keys(j, {"latencies", "recoveries", "grid", "plan"}, "ProfilingMatrix");
  v.latencies = read_optional_matrix(j.at("latencies"));
  v.recoveries = read_optional_matrix(j.at("recoveries"));
  j.at("grid").get_to(v.grid);
  j.at("plan").get_to(v.plan);
  if (j.contains("invalid_reasons")) {
    j.at("invalid_reasons").get_to(v.invalid_reasons);
  } else {
    v.invalid_reasons.assign(v.latencies.size(), std::vector<std::string>(v.grid.z()));
  }
}

}  // namespace khaos

namespace khaos::workload {

void to_json(json& j, const GeneratorParams& v) {
  j = json{{"kind", to_string(v.kind)}, {"duration_k", v.duration_k}, {"base_rate", v.base_rate},
           {"amplitude", v.amplitude},  {"seed", v.seed},             {"period", v.period},
           {"noise", v.noise},          {"start_time", v.start_time}};
}

void from_json(const json& j, GeneratorParams& v) {
  reject_unknown(j, {"kind", "duration_k", "base_rate", "amplitude", "seed", "period", "noise", "start_time"},
                 "GeneratorParams");
  if (j.contains("kind")) v.kind = parse_trace_kind(j.at("kind").get<std::string>());
  read_opt(j, "duration_k", v.duration_k);
  read_opt(j, "base_rate", v.base_rate);
  read_opt(j, "amplitude", v.amplitude);
  read_opt(j, "seed", v.seed);
  read_opt(j, "period", v.period);
  read_opt(j, "noise", v.noise);
  read_opt(j, "start_time", v.start_time);
}

}  // namespace khaos::workload

namespace khaos::sim {

void to_json(json& j, const PipelineSpec& v) {
  j = json{{"capacity_mu", v.capacity_mu},
           {"base_latency", v.base_latency},
           {"queue_latency_coeff", v.queue_latency_coeff},
           {"checkpoint_pause", v.checkpoint_pause},
           {"checkpoint_duration", v.checkpoint_duration},
           {"detection_timeout", v.detection_timeout},
           {"restart_duration", v.restart_duration},
           {"controlled_restart_downtime", v.controlled_restart_downtime},
           {"checkpoint_latency_factor", v.checkpoint_latency_factor}};
}

void from_json(const json& j, PipelineSpec& v) {
  reject_unknown(j,
                 {"capacity_mu", "base_latency", "queue_latency_coeff", "checkpoint_pause", "checkpoint_duration",
                  "detection_timeout", "restart_duration", "controlled_restart_downtime",
                  "checkpoint_latency_factor"},
                 "PipelineSpec");
  read_opt(j, "capacity_mu", v.capacity_mu);
  read_opt(j, "base_latency", v.base_latency);
  read_opt(j, "queue_latency_coeff", v.queue_latency_coeff);
  read_opt(j, "checkpoint_pause", v.checkpoint_pause);
  read_opt(j, "checkpoint_duration", v.checkpoint_duration);
  read_opt(j, "detection_timeout", v.detection_timeout);
  read_opt(j, "restart_duration", v.restart_duration);
  read_opt(j, "controlled_restart_downtime", v.controlled_restart_downtime);
  read_opt(j, "checkpoint_latency_factor", v.checkpoint_latency_factor);
}

void to_json(json& j, const SimEvent& v) { j = json{{"t", v.t}, {"kind", to_string(v.kind)}, {"value", v.value}}; }

void from_json(const json& j, SimEvent& v) {
  require_keys(j, {"t", "kind", "value"}, "SimEvent");
  j.at("t").get_to(v.t);
  v.kind = parse_event_kind(j.at("kind").get<std::string>());
  j.at("value").get_to(v.value);
}

void to_json(json& j, const SimRun& v) { j = json{{"seed", v.seed}, {"metrics", v.metrics}, {"events", v.events}}; }

void from_json(const json& j, SimRun& v) {
  require_keys(j, {"seed", "metrics", "events"}, "SimRun");
  j.at("seed").get_to(v.seed);
  j.at("metrics").get_to(v.metrics);
  j.at("events").get_to(v.events);
}

}  // namespace khaos::sim

namespace khaos::anomaly {

void to_json(json& j, const DetectorConfig& v) {
  j = json{{"ar_order", v.ar_order},
           {"diff_order", v.diff_order},
           {"threshold_multiplier", v.threshold_multiplier},
           {"error_window", v.error_window},
           {"consecutive_normal_needed", v.consecutive_normal_needed},
           {"learning_rate", v.learning_rate},
           {"error_floor", v.error_floor}};
}

void from_json(const json& j, DetectorConfig& v) {
  reject_unknown(j,
                 {"ar_order", "diff_order", "threshold_multiplier", "error_window", "consecutive_normal_needed",
                  "learning_rate", "error_floor"},
                 "DetectorConfig");
  read_opt(j, "ar_order", v.ar_order);
  read_opt(j, "diff_order", v.diff_order);
  read_opt(j, "threshold_multiplier", v.threshold_multiplier);
  read_opt(j, "error_window", v.error_window);
  read_opt(j, "consecutive_normal_needed", v.consecutive_normal_needed);
  read_opt(j, "learning_rate", v.learning_rate);
  read_opt(j, "error_floor", v.error_floor);
}

void to_json(json& j, const AnomalyInterval& v) {
  j = json{{"start", v.start}, {"end", v.end}, {"channel", to_string(v.channel)}};
}

void from_json(const json& j, AnomalyInterval& v) {
  require_keys(j, {"start", "end", "channel"}, "AnomalyInterval");
  j.at("start").get_to(v.start);
  j.at("end").get_to(v.end);
  const auto channel = j.at("channel").get<std::string>();
  if (channel == "throughput") v.channel = Channel::Throughput;
  else if (channel == "lag") v.channel = Channel::Lag;
  else throw FormatError("AnomalyInterval: unknown channel '" + channel + "'");
}

}  // namespace khaos::anomaly

namespace khaos::profiler {

void to_json(json& j, const ProfilingOptions& v) {
  j = json{{"margin_before", v.margin_before},
           {"margin_after", v.margin_after},
           {"epsilon", v.epsilon},
           {"latency_window", v.latency_window},
           {"max_invalid_fraction", v.max_invalid_fraction},
           {"anchor", v.anchor == InjectionAnchor::Completion ? "completion" : "start"},
           {"detector", v.detector},
           {"threads", v.threads}};
}

void from_json(const json& j, ProfilingOptions& v) {
  reject_unknown(j,
                 {"margin_before", "margin_after", "epsilon", "latency_window", "max_invalid_fraction", "anchor",
                  "detector", "threads"},
                 "ProfilingOptions");
  read_opt(j, "margin_before", v.margin_before);
  read_opt(j, "margin_after", v.margin_after);
  read_opt(j, "epsilon", v.epsilon);
  read_opt(j, "latency_window", v.latency_window);
  read_opt(j, "max_invalid_fraction", v.max_invalid_fraction);
  if (j.contains("anchor")) {
    const auto anchor = j.at("anchor").get<std::string>();
    if (anchor == "completion") v.anchor = InjectionAnchor::Completion;
    else if (anchor == "start") v.anchor = InjectionAnchor::Start;
    else throw FormatError("ProfilingOptions: anchor must be 'completion' or 'start'");
  }
  read_opt(j, "detector", v.detector);
  read_opt(j, "threads", v.threads);
}

}  // namespace khaos::profiler

namespace khaos::modeling {

void to_json(json& j, const RegressionModel& v) {
  j = json{{"target", to_string(v.target)},
           {"degree", v.degree},
           {"features", feature_names(v.degree)},
           {"coefficients", v.coefficients},
           {"mean", v.mean},
           {"stddev", v.stddev},
           {"training_summary", {{"sample_count", v.sample_count}, {"residual_rms", v.residual_rms}}}};
}

void from_json(const json& j, RegressionModel& v) {
  require_keys(j, {"target", "degree", "coefficients", "mean", "stddev", "training_summary"}, "RegressionModel");
  v.target = parse_target(j.at("target").get<std::string>());
  j.at("degree").get_to(v.degree);
  if (v.degree != 1 && v.degree != 2) throw FormatError("RegressionModel: degree must be 1 or 2");
  j.at("coefficients").get_to(v.coefficients);
  if (v.coefficients.size() != feature_names(v.degree).size()) {
    throw FormatError("RegressionModel: coefficient count does not match the degree");
  }
  j.at("mean").get_to(v.mean);
  j.at("stddev").get_to(v.stddev);
  const auto& summary = j.at("training_summary");
  summary.at("sample_count").get_to(v.sample_count);
  summary.at("residual_rms").get_to(v.residual_rms);
}

void to_json(json& j, const ForecastOptions& v) {
  j = json{{"ar_order", v.ar_order}, {"diff_order", v.diff_order}, {"learning_rate", v.learning_rate}};
}

void from_json(const json& j, ForecastOptions& v) {
  reject_unknown(j, {"ar_order", "diff_order", "learning_rate"}, "ForecastOptions");
  read_opt(j, "ar_order", v.ar_order);
  read_opt(j, "diff_order", v.diff_order);
  read_opt(j, "learning_rate", v.learning_rate);
}

}  // namespace khaos::modeling

namespace khaos::optimizer {

void to_json(json& j, const OptimizerDecision& v) {
  j = json{{"t", v.t},
           {"kind", to_string(v.kind)},
           {"new_ci", v.new_ci ? json(*v.new_ci) : json(nullptr)},
           {"q_r", v.q_r},
           {"q_l_star", v.q_l_star},
           {"forecast_drop", v.forecast_drop},
           {"tr_avg", v.tr_avg},
           {"current_ci", v.current_ci},
           {"p", v.p},
           {"observed_latency", v.observed_latency},
           {"latency_violated", v.latency_violated},
           {"recovery_violated", v.recovery_violated},
           {"forecast_cold", v.forecast_cold}};
}

void from_json(const json& j, OptimizerDecision& v) {
  require_keys(j, {"t", "kind", "new_ci", "q_r", "q_l_star", "forecast_drop", "tr_avg"}, "OptimizerDecision");
  j.at("t").get_to(v.t);
  v.kind = parse_decision_kind(j.at("kind").get<std::string>());
  if (j.at("new_ci").is_null()) v.new_ci.reset();
  else v.new_ci = j.at("new_ci").get<double>();
  j.at("q_r").get_to(v.q_r);
  j.at("q_l_star").get_to(v.q_l_star);
  j.at("forecast_drop").get_to(v.forecast_drop);
  j.at("tr_avg").get_to(v.tr_avg);
  read_opt(j, "current_ci", v.current_ci);
  read_opt(j, "p", v.p);
  read_opt(j, "observed_latency", v.observed_latency);
  read_opt(j, "latency_violated", v.latency_violated);
  read_opt(j, "recovery_violated", v.recovery_violated);
  read_opt(j, "forecast_cold", v.forecast_cold);
}

void to_json(json& j, const ControlOptions& v) {
  j = json{{"cycle_period", v.cycle_period},
           {"window", v.window},
           {"rescale_window_k", v.rescale_window_k},
           {"forecast", v.forecast}};
}

void from_json(const json& j, ControlOptions& v) {
  reject_unknown(j, {"cycle_period", "window", "rescale_window_k", "forecast"}, "ControlOptions");
  read_opt(j, "cycle_period", v.cycle_period);
  read_opt(j, "window", v.window);
  read_opt(j, "rescale_window_k", v.rescale_window_k);
  read_opt(j, "forecast", v.forecast);
}

}  // namespace khaos::optimizer

namespace khaos::io {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

template <typename T>
T parse_number(const std::string& text, size_t line) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("line " + std::to_string(line) + ": cannot parse '" + text + "' as a number");
  }
  return value;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

// Reads the header and calls row(fields, line_no) for each data line.
template <typename F>
void read_csv(std::istream& in, const std::string& header, size_t columns, F&& row) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != header) {
    throw FormatError("expected CSV header '" + header + "'");
  }
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != columns) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns) + " fields");
    }
    row(fields, line_no);
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_trace_csv(std::ostream& out, const WorkloadTrace& trace) {
  out << "timestamp,count\n";
  for (size_t i = 0; i < trace.counts.size(); ++i) {
    out << trace.start_time + static_cast<int64_t>(i) << ',' << trace.counts[i] << '\n';
  }
}

WorkloadTrace read_trace_csv(std::istream& in) {
  WorkloadTrace trace;
  bool first = true;
  read_csv(in, "timestamp,count", 2, [&](const std::vector<std::string>& f, size_t line) {
    const auto ts = parse_number<int64_t>(f[0], line);
    if (first) {
      trace.start_time = ts;
      first = false;
    } else if (ts != trace.end_time()) {
      throw FormatError("line " + std::to_string(line) + ": timestamps must be contiguous");
    }
    trace.counts.push_back(parse_number<int64_t>(f[1], line));
  });
  return trace;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsSample> metrics) {
  out << "t,input_throughput,consumer_lag,avg_latency\n";
  for (const auto& s : metrics) {
    out << format_double(s.t) << ',' << format_double(s.input_throughput) << ',' << format_double(s.consumer_lag)
        << ',' << format_double(s.avg_latency) << '\n';
  }
}

std::vector<MetricsSample> read_metrics_csv(std::istream& in) {
  std::vector<MetricsSample> out;
  read_csv(in, "t,input_throughput,consumer_lag,avg_latency", 4,
           [&](const std::vector<std::string>& f, size_t line) {
             out.push_back({parse_number<double>(f[0], line), parse_number<double>(f[1], line),
                            parse_number<double>(f[2], line), parse_number<double>(f[3], line)});
           });
  return out;
}

void write_rows_csv(std::ostream& out, std::span<const profiler::ProfilingRow> rows) {
  out << "rate,ci,latency,recovery\n";
  for (const auto& r : rows) {
    out << format_double(r.rate) << ',' << format_double(r.ci) << ',' << (r.latency ? format_double(*r.latency) : "")
        << ',' << (r.recovery ? format_double(*r.recovery) : "") << '\n';
  }
}

std::vector<profiler::ProfilingRow> read_rows_csv(std::istream& in) {
  std::vector<profiler::ProfilingRow> out;
  read_csv(in, "rate,ci,latency,recovery", 4, [&](const std::vector<std::string>& f, size_t line) {
    profiler::ProfilingRow r;
    r.rate = parse_number<double>(f[0], line);
    r.ci = parse_number<double>(f[1], line);
    if (!f[2].empty()) r.latency = parse_number<double>(f[2], line);
    if (!f[3].empty()) r.recovery = parse_number<double>(f[3], line);
    out.push_back(r);
  });
  return out;
}

void write_decision_log(std::ostream& out, std::span<const optimizer::OptimizerDecision> decisions) {
  for (const auto& d : decisions) out << json(d).dump() << '\n';
}

std::vector<optimizer::OptimizerDecision> read_decision_log(std::istream& in) {
  std::vector<optimizer::OptimizerDecision> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip_cr(line).empty()) continue;
    const auto origin = "decision log line " + std::to_string(line_no);
    out.push_back(from_json_checked<optimizer::OptimizerDecision>(parse_json(line, origin), origin));
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(origin + ": " + e.what());
  }
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace khaos::io
