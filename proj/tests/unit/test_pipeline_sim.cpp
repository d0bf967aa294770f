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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "khaos/pipeline_sim.hpp"
#include "khaos/workload.hpp"
#include "support.hpp"

using namespace khaos;
using namespace khaos::sim;
using khaos::testing::constant_trace;
using khaos::testing::reference_spec;

namespace {

// Ground-truth recovery of one worst-case failure on a constant trace.
double worst_case_recovery(const PipelineSpec& spec, int64_t rate, double ci) {
  Simulator sim(spec, constant_trace(rate, 3000), ci, 1);
  sim.request_worst_case_failure(900.0, 1.0);
  sim.run_to_end();
  const auto r = sim.run().recovery_times();
  REQUIRE(r.size() == 1);
  REQUIRE(r[0].has_value());
  return *r[0];
}

double steady_latency(const PipelineSpec& spec, int64_t rate, double ci) {
  const auto run = sim::run(spec, constant_trace(rate, 1200), ci, {}, {}, 1);
  double sum = 0;
  for (size_t i = 600; i < run.metrics.size(); ++i) sum += run.metrics[i].avg_latency;
  return sum / static_cast<double>(run.metrics.size() - 600);
}

}  // namespace

TEST_CASE("steady state below capacity keeps lag at zero") {
  auto spec = reference_spec();
  const auto run = sim::run(spec, constant_trace(1000, 600), 30.0, {}, {}, 3);
  REQUIRE(run.metrics.size() == 600);
  for (const auto& m : run.metrics) {
    CHECK(m.consumer_lag == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(m.input_throughput == doctest::Approx(1000.0));
  }
  SUBCASE("latency repeats every checkpoint interval") {
    for (size_t i = 100; i + 30 < run.metrics.size(); ++i) {
      CHECK(run.metrics[i].avg_latency == doctest::Approx(run.metrics[i + 30].avg_latency));
    }
  }
  SUBCASE("without checkpoint pauses latency is constant") {
    spec.checkpoint_pause = 0.0;
    const auto flat = sim::run(spec, constant_trace(1000, 600), 30.0, {}, {}, 3);
    for (const auto& m : flat.metrics) CHECK(m.avg_latency == doctest::Approx(flat.metrics.front().avg_latency));
  }
}

TEST_CASE("oracle recovery time") {
  const auto spec = reference_spec();
  CHECK(oracle_recovery_time(spec, 0.0, 60.0) == 60.0);
  CHECK(oracle_recovery_time(spec, 1000.0, 60.0) == doctest::Approx(180.0));
  for (double ci : {10.0, 30.0, 60.0, 90.0}) {
    CHECK(oracle_recovery_time(spec, 800.0, ci + 15.0) > oracle_recovery_time(spec, 800.0, ci));
  }
  CHECK_THROWS_AS(oracle_recovery_time(spec, 2000.0, 60.0), DegenerateError);
}

TEST_CASE("one worst-case injection on a constant workload matches the oracle") {
  const auto spec = reference_spec();
  const double measured = worst_case_recovery(spec, 1000, 60.0);
  CHECK(std::abs(testing::relative_error(measured, 180.0)) <= 0.10);
}

TEST_CASE("simulator agrees with the oracle across the grid") {
  const auto spec = reference_spec();
  for (int64_t rate : {300, 700, 1100}) {
    for (double ci : ConfigGrid::make(10, 120, 5).values) {
      const double oracle = oracle_recovery_time(spec, static_cast<double>(rate), ci);
      INFO("rate=" << rate << " ci=" << ci);
      CHECK(std::abs(testing::relative_error(worst_case_recovery(spec, rate, ci), oracle)) <= 0.10);
    }
  }
}

TEST_CASE("runs are deterministic") {
  workload::GeneratorParams p;
  p.kind = workload::TraceKind::RandomWalk;
  p.duration_k = 2000;
  p.amplitude = 400;
  p.seed = 9;
  const auto trace = workload::generate_trace(p);
  const auto a = sim::run(reference_spec(), trace, 45.0, {500.5, 1300.0}, {{900.0, 20.0}}, 5);
  const auto b = sim::run(reference_spec(), trace, 45.0, {500.5, 1300.0}, {{900.0, 20.0}}, 5);
  CHECK(a == b);
}

TEST_CASE("input errors") {
  const auto trace = constant_trace(100, 100, 50);
  CHECK_THROWS_AS(sim::run(reference_spec(), trace, 10.0, {20.0}, {}, 0), ParameterError);
  CHECK_THROWS_AS(sim::run(reference_spec(), trace, 10.0, {150.0}, {}, 0), ParameterError);
  CHECK_THROWS_AS(sim::run(reference_spec(), trace, 0.0, {}, {}, 0), ParameterError);
  auto bad = reference_spec();
  bad.capacity_mu = 0.0;
  CHECK_THROWS_AS(sim::run(bad, trace, 10.0, {}, {}, 0), ParameterError);
}

TEST_CASE("capacity below input completes without catching up") {
  auto spec = reference_spec();
  spec.capacity_mu = 900.0;
  const auto run = sim::run(spec, constant_trace(1000, 600), 30.0, {200.0}, {}, 0);
  CHECK(run.metrics.size() == 600);
  CHECK_FALSE(run.recovery_times().front().has_value());
}

TEST_CASE("replay windows") {
  const auto trace = constant_trace(10, 5000);
  SUBCASE("margins covering the trace give the full trace") {
    const auto w = replay_window(trace, FailurePlan{{{1000, 10}, {4000, 10}}}, 5000, 5000);
    REQUIRE(w.size() == 1);
    CHECK(w[0] == trace);
  }
  SUBCASE("distant points give disjoint segments") {
    const auto w = replay_window(trace, FailurePlan{{{1000, 10}, {2000, 10}}}, 100, 300);
    REQUIRE(w.size() == 2);
    CHECK(w[0].duration_k() == 400);
    CHECK(w[1].duration_k() == 400);
    CHECK(w[0].start_time == 900);
    CHECK(w[1].start_time == 1900);
  }
  SUBCASE("close points merge") {
    const auto w = replay_window(trace, FailurePlan{{{1000, 10}, {1150, 10}}}, 100, 100);
    REQUIRE(w.size() == 1);
    CHECK(w[0].start_time == 900);
    CHECK(w[0].end_time() == 1250);
  }
}

TEST_CASE("events are time ordered and failures are followed by catch-up") {
  workload::GeneratorParams p;
  p.kind = workload::TraceKind::Sinusoidal;
  p.duration_k = 4000;
  p.amplitude = 500;
  p.seed = 3;
  const auto trace = workload::generate_trace(p);
  const auto run = sim::run(PipelineSpec::defaults_for(trace), trace, 30.0, {700.0, 2100.0, 3000.0}, {{1500, 60}}, 0);
  for (size_t i = 1; i < run.events.size(); ++i) CHECK(run.events[i - 1].t <= run.events[i].t);
  const auto r = run.recovery_times();
  REQUIRE(r.size() == 3);
  for (const auto& x : r) CHECK(x.has_value());
}

TEST_CASE("conservation: consumed offset plus lag equals produced events") {
  workload::GeneratorParams p;
  p.kind = workload::TraceKind::RandomWalk;
  p.duration_k = 3000;
  p.amplitude = 600;
  p.seed = 21;
  const auto trace = workload::generate_trace(p);
  Simulator sim(PipelineSpec::defaults_for(trace), trace, 40.0, 0);
  sim.inject_failure(800.25);
  sim.inject_failure(2000.0);
  sim.reconfigure(1400.0, 15.0);
  double produced = 0.0;
  double consumed = 0.0;
  for (int64_t s = trace.start_time; s < trace.end_time(); ++s) {
    const double offset_before = sim.offset();
    sim.advance_until(static_cast<double>(s + 1));
    produced += static_cast<double>(trace.at(s));
    consumed += sim.metrics().back().input_throughput;
    CHECK(sim.produced() == doctest::Approx(produced));
    CHECK(sim.offset() + sim.lag() == doctest::Approx(produced));
    CHECK(sim.metrics().back().consumer_lag == doctest::Approx(sim.lag()));
    CHECK(sim.lag() >= -1e-9);
    // Offset only moves backwards through a failure rollback.
    if (sim.offset() < offset_before - 1e-9) CHECK(sim.events().back().t <= static_cast<double>(s + 1));
  }
  CHECK(consumed >= sim.offset() - 1e-6);

  SUBCASE("without failures every consumed event advances the offset") {
    const auto run = sim::run(PipelineSpec::defaults_for(trace), trace, 40.0, {}, {}, 0);
    double sum = 0;
    for (const auto& m : run.metrics) sum += m.input_throughput;
    const double total = std::accumulate(trace.counts.begin(), trace.counts.end(), 0.0);
    CHECK(sum + run.metrics.back().consumer_lag == doctest::Approx(total));
  }
}

TEST_CASE("worst-case recovery is nondecreasing in ci") {
  const auto spec = reference_spec();
  for (int64_t rate : {200, 800, 1400}) {
    double prev = 0.0;
    for (double ci = 10.0; ci <= 120.0; ci += 5.0) {
      const double r = worst_case_recovery(spec, rate, ci);
      CHECK(r >= prev);
      prev = r;
    }
  }
}

TEST_CASE("steady-state latency is nonincreasing in ci") {
  const auto spec = reference_spec();
  for (int64_t rate : {200, 800, 1400}) {
    double prev = 1e18;
    for (double ci = 10.0; ci <= 120.0; ci += 5.0) {
      const double l = steady_latency(spec, rate, ci);
      CHECK(l <= prev * 1.05);
      prev = l;
    }
  }
}

TEST_CASE("controlled restart never rolls back the offset") {
  const auto spec = reference_spec();
  Simulator sim(spec, constant_trace(1000, 1200), 60.0, 0);
  sim.reconfigure(500.0, 20.0);
  double last_offset = 0.0;
  double peak_lag = 0.0;
  while (!sim.finished()) {
    sim.advance_until(sim.now() + 1.0);
    CHECK(sim.offset() >= last_offset - 1e-9);
    last_offset = sim.offset();
    peak_lag = std::max(peak_lag, sim.lag());
  }
  // Only downtime lag accrues: rate * controlled_restart_downtime, plus one pause.
  CHECK(peak_lag == doctest::Approx(1000.0 * spec.controlled_restart_downtime).epsilon(0.05));
  CHECK(sim.current_ci() == 20.0);
  const auto reconf = sim.run().events_of(EventKind::Reconfigured);
  REQUIRE(reconf.size() == 1);
  CHECK(reconf[0].value == 20.0);
  CHECK(sim.run().events_of(EventKind::FailureInjected).empty());
}

TEST_CASE("worst-case failure lands just before a checkpoint completes") {
  auto spec = reference_spec();
  Simulator sim(spec, constant_trace(500, 600), 60.0, 0);
  sim.request_worst_case_failure(100.0, 1.0);
  sim.run_to_end();
  const auto failures = sim.run().events_of(EventKind::FailureInjected);
  REQUIRE(failures.size() == 1);
  CHECK(failures[0].t == doctest::Approx(121.0));
}

TEST_CASE("event kinds round trip through their names") {
  for (auto kind : {EventKind::CheckpointStarted, EventKind::CheckpointCompleted, EventKind::FailureInjected,
                    EventKind::ProcessingResumed, EventKind::CaughtUp, EventKind::Reconfigured}) {
    CHECK(parse_event_kind(to_string(kind)) == kind);
  }
}
