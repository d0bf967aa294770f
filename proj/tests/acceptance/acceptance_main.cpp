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

// Acceptance harness: one PASS/FAIL line per criterion, exit status 1 on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "khaos/anomaly.hpp"
#include "khaos/experiment.hpp"
#include "khaos/io.hpp"
#include "khaos/modeling.hpp"
#include "khaos/optimizer.hpp"
#include "khaos/pipeline_sim.hpp"
#include "khaos/profiler.hpp"
#include "khaos/random.hpp"
#include "khaos/workload.hpp"

using namespace khaos;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[" << what << "] ";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

WorkloadTrace constant_trace(int64_t rate, int64_t duration) {
  return WorkloadTrace{0, std::vector<int64_t>(static_cast<size_t>(duration), rate)};
}

sim::PipelineSpec reference_spec() {
  sim::PipelineSpec spec;
  spec.capacity_mu = 2000.0;
  spec.detection_timeout = 50.0;
  spec.restart_duration = 10.0;
  return spec;
}

double relative_error(double measured, double expected) { return std::abs(measured - expected) / expected; }

experiment::Scenario iot_scenario() {
  return io::load_json<experiment::Scenario>(fs::path(KHAOS_SOURCE_DIR) / "scenarios" / "iot_analog.json");
}

// Ground truth of one worst-case failure on a constant trace.
sim::SimRun worst_case_run(const sim::PipelineSpec& spec, const WorkloadTrace& trace, double ci) {
  sim::Simulator s(spec, trace, ci, 1);
  s.request_worst_case_failure(900.0, 1.0);
  s.run_to_end();
  return s.run();
}

Outcome oracle_equivalence() {
  Outcome o;
  const auto start = Clock::now();
  const auto spec = reference_spec();
  double worst = 0.0;
  for (int64_t rate : {200, 400, 600, 800, 1000}) {
    for (double ci : ConfigGrid::make(10, 120, 5).values) {
      const auto r = worst_case_run(spec, constant_trace(rate, 3000), ci).recovery_times();
      const double oracle = sim::oracle_recovery_time(spec, static_cast<double>(rate), ci);
      const double err = r.at(0) ? relative_error(*r[0], oracle) : std::numeric_limits<double>::infinity();
      worst = std::max(worst, err);
    }
  }
  const double elapsed = seconds_since(start);
  o.require(worst <= 0.10, "max error above 10%");
  o.require(elapsed < 30.0, "runtime above 30 s");
  o.detail << "25 cells, max relative error " << worst << ", " << elapsed << " s";
  return o;
}

Outcome detector_accuracy() {
  Outcome o;
  const auto spec = reference_spec();
  std::vector<double> errors;
  uint64_t seed = 100;
  for (double rate : {300.0, 600.0, 900.0, 1200.0}) {
    for (double ci : ConfigGrid::make(10, 120, 5).values) {
      workload::GeneratorParams p;
      p.kind = workload::TraceKind::Constant;
      p.duration_k = 3000;
      p.base_rate = rate;
      p.noise = 0.02;
      p.seed = ++seed;
      const auto run = worst_case_run(spec, workload::generate_trace(p), ci);
      const double failure = run.events_of(sim::EventKind::FailureInjected).at(0).t;
      const double truth = *run.recovery_times().at(0);
      try {
        const double measured =
            anomaly::measure_recovery({}, run.metrics, failure, 2.0 * spec.detection_timeout);
        errors.push_back(relative_error(measured, truth));
      } catch (const anomaly::DetectionMissError&) {
        errors.push_back(std::numeric_limits<double>::infinity());
      }
    }
  }
  std::sort(errors.begin(), errors.end());
  const double median = (errors[errors.size() / 2 - 1] + errors[errors.size() / 2]) / 2.0;
  o.require(errors.size() >= 20, "fewer than 20 injections");
  o.require(median <= 0.15, "median error above 15%");

  workload::GeneratorParams day;
  day.kind = workload::TraceKind::Diurnal;
  day.duration_k = 86400;
  day.base_rate = 1000;
  day.amplitude = 600;
  day.noise = 0.02;
  day.seed = 9;
  const auto trace = workload::generate_trace(day);
  size_t worst_fp = 0;
  for (double ci : {10.0, 60.0, 120.0}) {
    const auto run = sim::run(sim::PipelineSpec::defaults_for(trace), trace, ci, {}, {}, 9);
    worst_fp = std::max(worst_fp, anomaly::detect({}, run.metrics, anomaly::kDefaultRecoveryWarmup).size());
  }
  o.require(worst_fp <= 1, "more than one false anomaly per day");
  o.detail << errors.size() << " injections, median error " << median << ", false anomalies per day " << worst_fp;
  return o;
}

Outcome model_accuracy() {
  Outcome o;
  const auto scenario = iot_scenario();
  const auto result = experiment::run_experiment(scenario);
  // Held out: another trace, its own failure points, and CIs between the training grid values.
  const auto plan = workload::extract_failure_points(workload::smooth(result.trace, scenario.smoothing_window),
                                                     scenario.failure_points, scenario.failure_mode);
  const auto grid = ConfigGrid::make(23.75, 106.25, 4);
  const auto held_out =
      profiler::run_profiling(result.trace, plan, grid, scenario.spec, scenario.profiling, scenario.seed + 7);
  std::vector<modeling::Observation> lat;
  std::vector<modeling::Observation> rec;
  for (size_t i = 0; i < plan.m(); ++i) {
    for (size_t j = 0; j < grid.z(); ++j) {
      if (held_out.latencies[i][j]) lat.push_back({grid.values[j], plan.points[i].rate, *held_out.latencies[i][j]});
      if (held_out.recoveries[i][j]) rec.push_back({grid.values[j], plan.points[i].rate, *held_out.recoveries[i][j]});
    }
  }
  const auto el = modeling::avg_percent_error(result.models.latency, lat);
  const auto er = modeling::avg_percent_error(result.models.recovery, rec);
  o.require(el.value <= 0.15, "latency model error above 0.15");
  o.require(er.value <= 0.15, "recovery model error above 0.15");
  o.detail << "held-out M_L " << el.value << " (" << el.used << " cells), M_R " << er.value << " (" << er.used
           << " cells)";
  return o;
}

modeling::RegressionModel random_model(Rng& rng, modeling::Target target, double lo, double hi) {
  modeling::RegressionModel m;
  m.target = target;
  m.degree = 2;
  m.mean = {60.0, 1000.0};
  m.stddev = {35.0, 500.0};
  const double c0 = rng.uniform(lo, hi);
  m.coefficients.push_back(c0);
  for (int k = 1; k < 6; ++k) m.coefficients.push_back(rng.uniform(-0.3, 0.3) * c0);
  return m;
}

Outcome optimizer_exactness() {
  Outcome o;
  Rng rng(derive_seed(2024, 4));
  const QoSConstraints qos{1000, 240};
  size_t mismatches = 0;
  size_t feasible = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const optimizer::Models models{random_model(rng, modeling::Target::Latency, 100, 1100),
                                   random_model(rng, modeling::Target::Recovery, 20, 260)};
    const auto grid = ConfigGrid::make(rng.uniform(1, 20), rng.uniform(60, 200), 2 + rng.next() % 20);
    const double p = rng.uniform(0.3, 1.5);
    const double tr = rng.uniform(0, 2000);
    std::optional<double> best_ci;
    double best = std::numeric_limits<double>::infinity();
    for (double ci : grid.values) {
      const double qr = modeling::predict(models.recovery, ci, tr) / qos.r_const;
      const double ql = p * modeling::predict(models.latency, ci, tr) / qos.l_const;
      if (!(qr > 0 && qr < 1 && ql > 0 && ql < 1)) continue;
      const double value = 2.0 * std::max(qr, ql);
      if (value < best || (value == best && ci > *best_ci)) {
        best = value;
        best_ci = ci;
      }
    }
    const auto got = optimizer::select_ci(grid, models, p, tr, qos);
    if (got.has_value() != best_ci.has_value() || (got && got->ci != *best_ci)) ++mismatches;
    if (best_ci) ++feasible;
  }
  size_t identity_failures = 0;
  for (int i = 0; i < 100000; ++i) {
    const double a = rng.uniform(1e-12, 1.0 - 1e-12);
    const double b = rng.uniform(1e-12, 1.0 - 1e-12);
    const auto v = optimizer::evaluate_objective(a, b);
    if (!v || std::abs(*v - 2.0 * std::max(a, b)) > 1e-12) ++identity_failures;
  }
  o.require(mismatches == 0, "select_ci differs from brute force");
  o.require(identity_failures == 0, "objective identity broken");
  o.detail << "1000 instances (" << feasible << " feasible), " << mismatches << " mismatches; 100000 pairs, "
           << identity_failures << " identity failures";
  return o;
}

Outcome deferral_rule() {
  Outcome o;
  optimizer::ViolationStatus v;
  v.latency_violated = true;
  const optimizer::Candidate current{120.0, 0.9, 1.1, std::nullopt};
  const optimizer::Candidate selection{30.0, 0.5, 0.6, 1.2};
  const auto kind = [&](double drop) { return optimizer::decide(v, drop, selection, current).kind; };
  using optimizer::DecisionKind;
  o.require(kind(0.099) == DecisionKind::Reconfigure, "0.099 deferred");
  o.require(kind(0.100) == DecisionKind::Reconfigure, "0.100 deferred");
  o.require(kind(0.101) == DecisionKind::Deferred, "0.101 not deferred");
  o.detail << "0.099 -> " << optimizer::to_string(kind(0.099)) << ", 0.100 -> " << optimizer::to_string(kind(0.100))
           << ", 0.101 -> " << optimizer::to_string(kind(0.101));
  return o;
}

Outcome trend_reproduction() {
  Outcome o;
  const auto start = Clock::now();
  const auto scenario = iot_scenario();
  const auto result = experiment::run_experiment(scenario);
  const double elapsed = seconds_since(start);
  const auto find = [&](const std::string& name) -> const experiment::RunSummary& {
    for (const auto& r : result.report.runs) {
      if (r.name == name) return r;
    }
    throw std::runtime_error("missing run " + name);
  };
  const auto& khaos = find(experiment::kKhaosRun);
  const auto& s10 = find("10s");
  const auto& s90 = find("90s");
  const auto& s120 = find("120s");
  o.require(scenario.injections == 12 && khaos.recoveries.size() == 12, "not 12 injections");
  o.require(khaos.rec_violation_seconds < s90.rec_violation_seconds, "recovery violations not below 90s");
  o.require(khaos.rec_violation_seconds < s120.rec_violation_seconds, "recovery violations not below 120s");
  o.require(khaos.lat_violation_fraction < s10.lat_violation_fraction, "latency violations not below 10s");
  o.require(elapsed < 300.0, "runtime above 5 min");
  o.detail << "rec violation s: Khaos " << khaos.rec_violation_seconds << ", 90s " << s90.rec_violation_seconds
           << ", 120s " << s120.rec_violation_seconds << "; latency violation fraction: Khaos "
           << khaos.lat_violation_fraction << ", 10s " << s10.lat_violation_fraction << "; "
           << khaos.reconfigurations << " reconfigurations; " << elapsed << " s";
  return o;
}

Outcome monotonicity() {
  Outcome o;
  const auto spec = reference_spec();
  size_t recovery_breaks = 0;
  size_t latency_breaks = 0;
  for (int64_t rate : {200, 500, 800, 1100, 1400}) {
    double prev_r = 0.0;
    double prev_l = std::numeric_limits<double>::infinity();
    for (double ci = 10.0; ci <= 120.0; ci += 5.0) {
      const auto r = worst_case_run(spec, constant_trace(rate, 3000), ci).recovery_times().at(0);
      if (!r || *r < prev_r) ++recovery_breaks;
      if (r) prev_r = *r;
      const auto run = sim::run(spec, constant_trace(rate, 1200), ci, {}, {}, 1);
      double l = 0.0;
      for (size_t i = 600; i < run.metrics.size(); ++i) l += run.metrics[i].avg_latency;
      l /= static_cast<double>(run.metrics.size() - 600);
      if (l > prev_l * 1.05) ++latency_breaks;
      prev_l = l;
    }
  }
  o.require(recovery_breaks == 0, "recovery decreases with ci");
  o.require(latency_breaks == 0, "latency increases with ci beyond 5%");
  o.detail << "5 rates x 23 CIs, " << recovery_breaks << " recovery breaks, " << latency_breaks << " latency breaks";
  return o;
}

Outcome phase1_correctness() {
  Outcome o;
  size_t checks = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    for (auto kind : {workload::TraceKind::Sinusoidal, workload::TraceKind::Diurnal, workload::TraceKind::RandomWalk}) {
      workload::GeneratorParams p;
      p.kind = kind;
      p.duration_k = 6000;
      p.amplitude = 500;
      p.seed = seed;
      const auto sw = workload::smooth(workload::generate_trace(p));
      const int64_t t_min = workload::argmin_time(sw);
      const int64_t t_max = workload::argmax_time(sw);

      for (auto mode : {workload::FailureMode::RateEquidistant, workload::FailureMode::TimeEquidistant}) {
        const auto plan = workload::extract_failure_points(sw, 2, mode);
        std::vector<int64_t> got{plan.points[0].timestamp, plan.points[1].timestamp};
        std::vector<int64_t> want{t_min, t_max};
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        o.require(got == want, "m=2 endpoints");
        ++checks;
      }

      for (size_t m : {3u, 5u, 12u}) {
        const auto plan = workload::extract_failure_points(sw, m, workload::FailureMode::TimeEquidistant);
        const int64_t h = std::abs(t_max - t_min) / static_cast<int64_t>(m - 1);
        const int64_t dir = t_max >= t_min ? 1 : -1;
        std::vector<int64_t> want;
        for (size_t i = 0; i + 1 < m; ++i) want.push_back(t_min + dir * h * static_cast<int64_t>(i));
        want.push_back(t_max);
        std::sort(want.begin(), want.end());
        std::vector<int64_t> got;
        for (const auto& pt : plan.points) got.push_back(pt.timestamp);
        o.require(got == want, "time-equidistant spacing");
        ++checks;
      }

      if (kind == workload::TraceKind::Sinusoidal) {
        const auto& trace = sw.source;
        auto plan = workload::extract_failure_points(sw, 12);
        std::sort(plan.points.begin(), plan.points.end(), [](auto& a, auto& b) { return a.rate < b.rate; });
        const double step = (sw.max() - sw.min()) / 11.0;
        for (size_t i = 1; i < plan.points.size(); ++i) {
          // Tolerance: raw-count standard deviation inside the smoothing window.
          const int64_t t = plan.points[i].timestamp;
          double sum = 0, sq = 0, n = 0;
          for (int64_t s = std::max(trace.start_time, t - sw.window_w / 2);
               s <= std::min(trace.end_time() - 1, t + sw.window_w / 2); ++s) {
            const double x = static_cast<double>(trace.at(s));
            sum += x;
            sq += x * x;
            n += 1;
          }
          const double tol = std::sqrt(std::max(0.0, sq / n - (sum / n) * (sum / n)));
          o.require(std::abs(plan.points[i].rate - plan.points[i - 1].rate - step) <= tol, "rate spacing");
        }
        ++checks;
      }
    }
  }
  o.detail << checks << " plan checks over 30 traces";
  return o;
}

int run_cli(const fs::path& dir, const std::string& args, const std::string& stdout_name) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + std::string(KHAOS_CLI) + "' " + args + " > " +
                          stdout_name + " 2>&1";
  return std::system(cmd.c_str());
}

std::vector<std::string> cli_pipeline() {
  const std::string scenario = (fs::path(KHAOS_SOURCE_DIR) / "scenarios" / "iot_analog.json").string();
  return {
      "--seed 7 generate-trace --kind diurnal --duration 21600 --base 1000 --amplitude 700 --out trace.csv",
      "--seed 7 phase1 --trace trace.csv --m 12 --out plan.json",
      "--seed 7 phase1 --trace trace.csv --m 12 --mode time --out plan_time.json",
      "--seed 7 profile --trace trace.csv --plan plan.json --grid 10:120:5 --out matrix.json",
      "--seed 7 --out-dir models fit --matrix matrix.json",
      "--seed 7 --out-dir bundle run-experiment --scenario '" + scenario + "'",
      "--seed 7 --out-dir bundle report --bundle bundle",
  };
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism() {
  Outcome o;
  const auto base = fs::temp_directory_path() / "khaos_acceptance_determinism";
  fs::remove_all(base);
  const fs::path a = base / "a";
  const fs::path b = base / "b";
  const auto commands = cli_pipeline();
  for (const auto& dir : {a, b}) {
    fs::create_directories(dir);
    for (size_t i = 0; i < commands.size(); ++i) {
      if (run_cli(dir, commands[i], "stdout_" + std::to_string(i) + ".txt") != 0) {
        o.require(false, "command failed: " + commands[i]);
      }
    }
  }
  const auto fa = files_under(a);
  const auto fb = files_under(b);
  o.require(fa == fb, "file sets differ");
  size_t differing = 0;
  for (const auto& f : fa) {
    if (!fs::exists(b / f) || io::read_file(a / f) != io::read_file(b / f)) {
      ++differing;
      o.require(false, "differs: " + f.string());
    }
  }
  o.detail << commands.size() << " commands, " << fa.size() << " files compared, " << differing << " differ";
  if (o.pass) fs::remove_all(base);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"detector accuracy", detector_accuracy},
      {"model accuracy", model_accuracy},
      {"optimizer exactness", optimizer_exactness},
      {"deferral rule", deferral_rule},
      {"end-to-end trend reproduction", trend_reproduction},
      {"monotonicity", monotonicity},
      {"phase 1 correctness", phase1_correctness},
      {"determinism", determinism},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << " " << criteria[i].first << ": "
              << o.detail.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
