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

#include "khaos/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "khaos/io.hpp"
#include "khaos/modeling.hpp"
#include "khaos/random.hpp"

using nlohmann::json;

namespace khaos::experiment {

namespace {

void prefixed(Violations& out, const Violations& in, const std::string& prefix) {
  for (const auto& v : in) out.push_back({prefix + "." + v.path, v.message});
}

std::string run_name(double ci) { return io::format_double(ci) + "s"; }

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& what) {
  if (!j.is_object()) throw FormatError(what + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return item.key() == k; }) == keys.end()) {
      throw FormatError(what + ": unknown field '" + item.key() + "'");
    }
  }
}

}  // namespace

Violations validate(const Scenario& s) {
  Violations out;
  const auto& w = s.workload;
  if (w.duration_k < 2) out.push_back({"workload.duration_k", "duration_k >= 2"});
  if (!(w.base_rate >= 0.0)) out.push_back({"workload.base_rate", "base_rate >= 0"});
  if (!(w.amplitude >= 0.0)) out.push_back({"workload.amplitude", "amplitude >= 0"});
  if (w.kind != workload::TraceKind::Constant && w.amplitude > w.base_rate) {
    out.push_back({"workload.amplitude", "amplitude <= base_rate"});
  }
  prefixed(out, sim::validate(s.spec), "spec");
  prefixed(out, validate(s.grid), "grid");
  prefixed(out, validate(s.constraints), "constraints");
  prefixed(out, anomaly::validate(s.profiling.detector), "profiling.detector");
  prefixed(out, optimizer::validate(s.optimizer), "optimizer");
  if (s.failure_points < 2) out.push_back({"phase1.failure_points", "failure_points >= 2"});
  if (s.smoothing_window < 1 || s.smoothing_window % 2 == 0 || s.smoothing_window > w.duration_k) {
    out.push_back({"phase1.smoothing_window", "odd and within [1, duration_k]"});
  }
  if (s.model_degree != 1 && s.model_degree != 2) out.push_back({"model.degree", "degree in {1, 2}"});
  for (size_t i = 0; i < s.baselines.size(); ++i) {
    if (!(s.baselines[i] > 0.0)) out.push_back({"baselines[" + std::to_string(i) + "]", "ci > 0"});
  }
  if (!(s.initial_ci > 0.0)) out.push_back({"initial_ci", "initial_ci > 0"});
  if (!(s.injection_epsilon > 0.0 && s.injection_epsilon < s.spec.checkpoint_duration)) {
    out.push_back({"injections.epsilon", "0 < epsilon < checkpoint_duration"});
  }
  if (!(s.profiling.epsilon > 0.0 && s.profiling.epsilon < s.grid.ci_min)) {
    out.push_back({"profiling.epsilon", "0 < epsilon < ci_min"});
  }
  return out;
}

void to_json(json& j, const Scenario& v) {
  j = json{{"name", v.name},
           {"seed", v.seed},
           {"workload", v.workload},
           {"spec", v.spec},
           {"grid", v.grid},
           {"constraints", v.constraints},
           {"phase1",
            {{"failure_points", v.failure_points},
             {"mode", workload::to_string(v.failure_mode)},
             {"smoothing_window", v.smoothing_window}}},
           {"profiling", v.profiling},
           {"model", {{"degree", v.model_degree}}},
           {"optimizer", v.optimizer},
           {"baselines", v.baselines},
           {"initial_ci", v.initial_ci},
           {"injections", {{"count", v.injections}, {"epsilon", v.injection_epsilon}}}};
}

void from_json(const json& j, Scenario& v) {
  reject_unknown(j,
                 {"name", "seed", "workload", "spec", "grid", "constraints", "phase1", "profiling", "model",
                  "optimizer", "baselines", "initial_ci", "injections"},
                 "Scenario");
  read_opt(j, "name", v.name);
  read_opt(j, "seed", v.seed);
  read_opt(j, "workload", v.workload);
  read_opt(j, "spec", v.spec);
  read_opt(j, "grid", v.grid);
  read_opt(j, "constraints", v.constraints);
  if (auto it = j.find("phase1"); it != j.end()) {
    reject_unknown(*it, {"failure_points", "mode", "smoothing_window"}, "Scenario.phase1");
    read_opt(*it, "failure_points", v.failure_points);
    if (it->contains("mode")) v.failure_mode = workload::parse_failure_mode(it->at("mode").get<std::string>());
    read_opt(*it, "smoothing_window", v.smoothing_window);
  }
  read_opt(j, "profiling", v.profiling);
  if (auto it = j.find("model"); it != j.end()) {
    reject_unknown(*it, {"degree"}, "Scenario.model");
    read_opt(*it, "degree", v.model_degree);
  }
  read_opt(j, "optimizer", v.optimizer);
  read_opt(j, "baselines", v.baselines);
  read_opt(j, "initial_ci", v.initial_ci);
  if (auto it = j.find("injections"); it != j.end()) {
    reject_unknown(*it, {"count", "epsilon"}, "Scenario.injections");
    read_opt(*it, "count", v.injections);
    read_opt(*it, "epsilon", v.injection_epsilon);
  }
}

uint64_t sub_seed(const Scenario& scenario, SeedStream stream) {
  return derive_seed(scenario.seed, static_cast<uint64_t>(stream));
}

std::vector<double> nominal_failure_times(const WorkloadTrace& trace, size_t count) {
  std::vector<double> out;
  const double span = static_cast<double>(trace.duration_k());
  for (size_t i = 0; i < count; ++i) {
    const double offset = span * static_cast<double>(i + 1) / static_cast<double>(count + 1);
    out.push_back(static_cast<double>(trace.start_time) + std::floor(offset));
  }
  return out;
}

RunSummary summarize(const std::string& name, const sim::SimRun& run, double end_time,
                     const QoSConstraints& constraints, std::optional<double> static_ci, size_t reconfigurations) {
  RunSummary s;
  s.name = name;
  s.static_ci = static_ci;
  s.reconfigurations = reconfigurations;
  if (!run.metrics.empty()) {
    size_t violating = 0;
    for (const auto& m : run.metrics) {
      s.avg_latency += m.avg_latency;
      if (m.avg_latency > constraints.l_const) ++violating;
    }
    s.avg_latency /= static_cast<double>(run.metrics.size());
    s.lat_violation_fraction = static_cast<double>(violating) / static_cast<double>(run.metrics.size());
  }
  const auto failures = run.events_of(sim::EventKind::FailureInjected);
  const auto recoveries = run.recovery_times();
  for (size_t i = 0; i < failures.size(); ++i) {
    double r = 0.0;
    if (recoveries[i]) {
      r = *recoveries[i];
    } else {
      r = end_time - failures[i].t;
      ++s.unrecovered;
    }
    s.injection_times.push_back(failures[i].t);
    s.recoveries.push_back(r);
    s.recovery_time += r;
    s.rec_violation_seconds += std::max(0.0, r - constraints.r_const);
  }
  return s;
}

void to_json(json& j, const RunSummary& v) {
  j = json{{"name", v.name},
           {"static_ci", v.static_ci ? json(*v.static_ci) : json(nullptr)},
           {"avg_latency", v.avg_latency},
           {"lat_violation_fraction", v.lat_violation_fraction},
           {"recovery_time", v.recovery_time},
           {"rec_violation_seconds", v.rec_violation_seconds},
           {"injection_times", v.injection_times},
           {"recoveries", v.recoveries},
           {"unrecovered", v.unrecovered},
           {"reconfigurations", v.reconfigurations}};
}

void from_json(const json& j, RunSummary& v) {
  j.at("name").get_to(v.name);
  if (j.at("static_ci").is_null()) v.static_ci.reset();
  else v.static_ci = j.at("static_ci").get<double>();
  j.at("avg_latency").get_to(v.avg_latency);
  j.at("lat_violation_fraction").get_to(v.lat_violation_fraction);
  j.at("recovery_time").get_to(v.recovery_time);
  j.at("rec_violation_seconds").get_to(v.rec_violation_seconds);
  j.at("injection_times").get_to(v.injection_times);
  j.at("recoveries").get_to(v.recoveries);
  j.at("unrecovered").get_to(v.unrecovered);
  j.at("reconfigurations").get_to(v.reconfigurations);
}

void to_json(json& j, const Report& v) {
  j = json{{"scenario", v.scenario},
           {"seed", v.seed},
           {"constraints", v.constraints},
           {"latency_model_error", v.latency_model_error},
           {"recovery_model_error", v.recovery_model_error},
           {"invalid_cells", v.invalid_cells},
           {"runs", v.runs}};
}

void from_json(const json& j, Report& v) {
  j.at("scenario").get_to(v.scenario);
  j.at("seed").get_to(v.seed);
  j.at("constraints").get_to(v.constraints);
  j.at("latency_model_error").get_to(v.latency_model_error);
  j.at("recovery_model_error").get_to(v.recovery_model_error);
  j.at("invalid_cells").get_to(v.invalid_cells);
  j.at("runs").get_to(v.runs);
}

namespace {

std::vector<modeling::Observation> observations(const ProfilingMatrix& matrix, modeling::Target target) {
  std::vector<modeling::Observation> out;
  const auto& cells = target == modeling::Target::Latency ? matrix.latencies : matrix.recoveries;
  for (size_t i = 0; i < cells.size(); ++i) {
    for (size_t j = 0; j < cells[i].size(); ++j) {
      if (cells[i][j]) out.push_back({matrix.grid.values[j], matrix.plan.points[i].rate, *cells[i][j]});
    }
  }
  return out;
}

}  // namespace

optimizer::Models fit_models(const ProfilingMatrix& matrix, int degree) {
  const auto lat = observations(matrix, modeling::Target::Latency);
  const auto rec = observations(matrix, modeling::Target::Recovery);
  return {modeling::fit(lat, modeling::Target::Latency, degree),
          modeling::fit(rec, modeling::Target::Recovery, degree)};
}

Result run_experiment(const Scenario& scenario) {
  if (auto v = validate(scenario); !v.empty()) {
    throw ParameterError("invalid scenario: " + describe(v));
  }
  Result result;

  auto recording_params = scenario.workload;
  recording_params.seed = sub_seed(scenario, SeedStream::RecordingTrace);
  result.recording = workload::generate_trace(recording_params);

  const auto smoothed = workload::smooth(result.recording, scenario.smoothing_window);
  result.plan = workload::extract_failure_points(smoothed, scenario.failure_points, scenario.failure_mode);
  result.matrix = profiler::run_profiling(result.recording, result.plan, scenario.grid, scenario.spec,
                                          scenario.profiling, sub_seed(scenario, SeedStream::Profiling));
  result.models = fit_models(result.matrix, scenario.model_degree);

  auto experiment_params = scenario.workload;
  experiment_params.seed = sub_seed(scenario, SeedStream::ExperimentTrace);
  result.trace = workload::generate_trace(experiment_params);
  result.nominal_failures = nominal_failure_times(result.trace, scenario.injections);

  const size_t n_runs = 1 + scenario.baselines.size();
  const uint64_t runs_seed = sub_seed(scenario, SeedStream::Runs);
  result.runs.resize(n_runs);
  std::vector<size_t> reconfigurations(n_runs, 0);
  std::vector<std::exception_ptr> errors(n_runs);

  auto make_sim = [&](size_t idx, double ci) {
    sim::Simulator sim(scenario.spec, result.trace, ci, derive_seed(runs_seed, idx));
    for (double t : result.nominal_failures) sim.request_worst_case_failure(t, scenario.injection_epsilon);
    return sim;
  };

  {
    std::vector<std::jthread> workers;
    workers.emplace_back([&] {
      try {
        auto sim = make_sim(0, scenario.initial_ci);
        modeling::ForecastModel forecaster(scenario.optimizer.forecast);
        std::vector<double> history(result.recording.counts.begin(), result.recording.counts.end());
        forecaster.warm(history);
        auto control = optimizer::control_loop(sim, result.models, forecaster, scenario.constraints,
                                               scenario.grid, scenario.optimizer);
        result.decisions = std::move(control.decisions);
        reconfigurations[0] = control.reconfigurations;
        result.runs[0] = sim.run();
      } catch (...) {
        errors[0] = std::current_exception();
      }
    });
    for (size_t b = 0; b < scenario.baselines.size(); ++b) {
      workers.emplace_back([&, b] {
        try {
          auto sim = make_sim(b + 1, scenario.baselines[b]);
          sim.run_to_end();
          result.runs[b + 1] = sim.run();
        } catch (...) {
          errors[b + 1] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Report& report = result.report;
  report.scenario = scenario.name;
  report.seed = scenario.seed;
  report.constraints = scenario.constraints;
  report.invalid_cells = result.matrix.invalid_cells();
  const auto lat_obs = observations(result.matrix, modeling::Target::Latency);
  const auto rec_obs = observations(result.matrix, modeling::Target::Recovery);
  report.latency_model_error = modeling::avg_percent_error(result.models.latency, lat_obs).value;
  report.recovery_model_error = modeling::avg_percent_error(result.models.recovery, rec_obs).value;
  const auto end = static_cast<double>(result.trace.end_time());
  report.runs.push_back(summarize(kKhaosRun, result.runs[0], end, scenario.constraints, std::nullopt,
                                  reconfigurations[0]));
  for (size_t b = 0; b < scenario.baselines.size(); ++b) {
    report.runs.push_back(summarize(run_name(scenario.baselines[b]), result.runs[b + 1], end, scenario.constraints,
                                    scenario.baselines[b], 0));
  }
  return result;
}

void write_bundle(const Result& result, const std::filesystem::path& dir) {
  auto csv = [](auto&& writer) {
    std::ostringstream out;
    writer(out);
    return out.str();
  };
  io::write_file(dir / "recording_trace.csv", csv([&](std::ostream& o) { io::write_trace_csv(o, result.recording); }));
  io::write_file(dir / "experiment_trace.csv", csv([&](std::ostream& o) { io::write_trace_csv(o, result.trace); }));
  io::save_json(dir / "plan.json", result.plan);
  io::save_json(dir / "matrix.json", result.matrix);
  const auto rows = profiler::flatten(result.matrix);
  io::write_file(dir / "matrix.csv", csv([&](std::ostream& o) { io::write_rows_csv(o, rows); }));
  io::save_json(dir / "model_latency.json", result.models.latency);
  io::save_json(dir / "model_recovery.json", result.models.recovery);
  io::write_file(dir / "decisions.jsonl", csv([&](std::ostream& o) { io::write_decision_log(o, result.decisions); }));
  for (size_t i = 0; i < result.runs.size(); ++i) {
    const auto run_dir = dir / "runs" / result.report.runs[i].name;
    io::write_file(run_dir / "metrics.csv",
                   csv([&](std::ostream& o) { io::write_metrics_csv(o, result.runs[i].metrics); }));
    io::write_file(run_dir / "events.json", io::dump_json(json(result.runs[i].events)));
  }
  io::save_json(dir / "report.json", result.report);
  io::write_file(dir / "report.csv", report_table_csv(result.report));
}

std::string report_table_csv(const Report& report) {
  std::ostringstream out;
  out << "run,avg_latency,lat_violations,recovery_time,rec_violations,reconfigurations\n";
  for (const auto& r : report.runs) {
    out << r.name << ',' << io::format_double(r.avg_latency) << ',' << io::format_double(r.lat_violation_fraction)
        << ',' << io::format_double(r.recovery_time) << ',' << io::format_double(r.rec_violation_seconds) << ','
        << r.reconfigurations << '\n';
  }
  return out.str();
}

std::string normalized_report_csv(const Report& report, std::vector<std::string>& warnings) {
  const auto khaos = std::find_if(report.runs.begin(), report.runs.end(),
                                  [](const RunSummary& r) { return r.name == kKhaosRun; });
  if (khaos == report.runs.end()) warnings.emplace_back("report has no Khaos run; normalized columns left empty");
  if (khaos != report.runs.end() && khaos->recovery_time == 0.0) {
    warnings.emplace_back("Khaos recovery time is 0; normalized recovery left empty");
  }
  if (khaos != report.runs.end() && khaos->rec_violation_seconds == 0.0) {
    warnings.emplace_back("Khaos recovery-violation seconds are 0; normalized violations left empty");
  }
  auto ratio = [](double value, std::optional<double> base) -> std::string {
    if (!base || *base == 0.0) return "";
    return io::format_double(value / *base);
  };
  std::optional<double> base_rec;
  std::optional<double> base_viol;
  if (khaos != report.runs.end()) {
    base_rec = khaos->recovery_time;
    base_viol = khaos->rec_violation_seconds;
  }
  std::ostringstream out;
  out << "run,lat_violation_fraction,recovery_time,recovery_time_normalized,rec_violations,"
         "rec_violations_normalized\n";
  for (const auto& r : report.runs) {
    out << r.name << ',' << io::format_double(r.lat_violation_fraction) << ',' << io::format_double(r.recovery_time)
        << ',' << ratio(r.recovery_time, base_rec) << ',' << io::format_double(r.rec_violation_seconds) << ','
        << ratio(r.rec_violation_seconds, base_viol) << '\n';
  }
  return out.str();
}

}  // namespace khaos::experiment
