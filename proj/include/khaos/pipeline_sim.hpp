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
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "khaos/domain.hpp"

namespace khaos::sim {

/// Cost and timing parameters of the simulated checkpointed job.
struct PipelineSpec {
  double capacity_mu = 2000.0;               // events/s
  double base_latency = 200.0;               // ms
  double queue_latency_coeff = 0.5;          // ms per event of lag
  double checkpoint_pause = 400.0;           // ms of processing stall per checkpoint
  double checkpoint_duration = 2.0;          // s from start to completion
  double detection_timeout = 50.0;           // s
  double restart_duration = 10.0;            // s
  double controlled_restart_downtime = 15.0; // s
  // Weight of the amortized checkpoint_pause / ci term in every latency sample.
  double checkpoint_latency_factor = 1.0;

  /// Downtime after a failure before processing resumes.
  [[nodiscard]] double failure_downtime() const { return detection_timeout + restart_duration; }

  /// Defaults with capacity set to twice the trace peak.
  static PipelineSpec defaults_for(const WorkloadTrace& trace);

  bool operator==(const PipelineSpec&) const = default;
};

Violations validate(const PipelineSpec& spec);

enum class EventKind { CheckpointStarted, CheckpointCompleted, FailureInjected, ProcessingResumed, CaughtUp, Reconfigured };

std::string to_string(EventKind kind);
EventKind parse_event_kind(const std::string& name);

struct SimEvent {
  double t = 0.0;
  EventKind kind = EventKind::CheckpointStarted;
  // Reconfigured: new ci. Checkpoint events: persisted offset. Otherwise lag at t.
  double value = 0.0;

  bool operator==(const SimEvent&) const = default;
};

/// 1 Hz metrics plus the ordered event log of one simulated deployment.
/// Sample t = s + 1 covers the second [s, s + 1); consumer_lag is the gauge at
/// the end of the second, avg_latency the mean over it.
struct SimRun {
  std::vector<MetricsSample> metrics;
  std::vector<SimEvent> events;
  uint64_t seed = 0;

  [[nodiscard]] std::vector<SimEvent> events_of(EventKind kind) const;
  /// CaughtUp time minus injection time for each FailureInjected, or nullopt
  /// when the run ended before catching up.
  [[nodiscard]] std::vector<std::optional<double>> recovery_times() const;

  bool operator==(const SimRun&) const = default;
};

struct ReconfigCommand {
  double t = 0.0;
  double new_ci = 0.0;
};

/// Fluid discrete-event simulator of a checkpointed job replaying a trace.
///
/// Processing is piecewise linear between events. Input accrues lag at the
/// trace rate; processing drains it at capacity_mu. Checkpoints start every ci
/// seconds after (re)start, stall processing for checkpoint_pause and persist
/// the offset captured at their start once they complete. A failure rolls the
/// offset back to the last completed checkpoint and halts processing for the
/// failure downtime. A reconfiguration saves the offset and halts processing
/// for controlled_restart_downtime before the new ci applies.
///
/// One instance is single-threaded; instances share no state.
class Simulator {
 public:
  Simulator(PipelineSpec spec, WorkloadTrace trace, double ci, uint64_t seed = 0);

  /// Fails the job at absolute time t (must lie within the trace and not in the past).
  void inject_failure(double t);
  /// Fails the job epsilon seconds before the first checkpoint completing
  /// strictly after nominal. Survives aborted checkpoints by re-arming.
  void request_worst_case_failure(double nominal, double epsilon);
  /// Controlled restart at t that switches to new_ci.
  void reconfigure(double t, double new_ci);

  /// Simulates whole seconds until now() >= t or the trace ends.
  void advance_until(double t);
  void run_to_end();

  [[nodiscard]] bool finished() const { return now_ >= static_cast<double>(trace_.end_time()); }
  [[nodiscard]] double now() const { return now_; }
  [[nodiscard]] double current_ci() const { return ci_; }
  [[nodiscard]] bool is_running() const { return !down_until_.has_value(); }
  /// True between a failure or controlled restart and the matching CaughtUp.
  [[nodiscard]] bool is_recovering() const { return band_.has_value(); }
  [[nodiscard]] double lag() const { return produced_ - offset_; }
  [[nodiscard]] double produced() const { return produced_; }
  /// Current consumed offset (rolled back on failure).
  [[nodiscard]] double offset() const { return offset_; }
  [[nodiscard]] const PipelineSpec& spec() const { return spec_; }
  [[nodiscard]] const WorkloadTrace& trace() const { return trace_; }
  [[nodiscard]] const std::vector<MetricsSample>& metrics() const { return run_.metrics; }
  [[nodiscard]] const std::vector<SimEvent>& events() const { return run_.events; }
  [[nodiscard]] const SimRun& run() const { return run_; }

 private:
  struct Checkpoint {
    uint64_t id = 0;
    double started = 0.0;
    double completes = 0.0;
    double offset = 0.0;
  };
  struct PendingFailure {
    double t = 0.0;
    std::optional<uint64_t> checkpoint;  // set for worst-case injections bound to a checkpoint
    double epsilon = 0.0;
  };

  void simulate_second();
  void flow(double from, double to, double rate, double& consumed, double& lag_area);
  [[nodiscard]] double next_checkpoint_start() const;
  void handle_events_at(double t);
  void start_checkpoint(double t);
  void abort_checkpoint();
  void fail(double t);
  void restart(double t, double downtime);
  void emit(double t, EventKind kind, double value);

  PipelineSpec spec_;
  WorkloadTrace trace_;
  double ci_;
  double now_;

  double produced_ = 0.0;
  double offset_ = 0.0;
  double last_completed_offset_ = 0.0;

  std::optional<double> down_until_;
  std::optional<double> pending_ci_;  // applied on resume after a controlled restart
  double stall_until_ = -1.0;
  double schedule_origin_;
  uint64_t schedule_n_ = 1;
  uint64_t next_checkpoint_id_ = 0;
  std::optional<Checkpoint> inflight_;

  std::vector<PendingFailure> failures_;
  std::vector<double> armed_worst_case_;  // epsilons waiting for the next checkpoint
  std::vector<std::pair<double, double>> worst_case_requests_;  // (nominal, epsilon) not yet armed
  std::deque<ReconfigCommand> reconfigs_;

  std::optional<double> band_;  // CaughtUp threshold while recovering

  SimRun run_;
};

/// Runs a full replay of the trace with the given failure and reconfiguration schedule.
SimRun run(const PipelineSpec& spec, const WorkloadTrace& trace, double ci, const std::vector<double>& injections,
           const std::vector<ReconfigCommand>& reconfig_commands, uint64_t seed);

/// Closed-form worst-case recovery time under constant load:
/// d + B / (mu - rate), d = failure downtime, B = rate * (ci + d).
double oracle_recovery_time(const PipelineSpec& spec, double rate_w, double ci);

/// Sub-traces spanning [t - margin_before, t + margin_after] around each failure
/// point, clipped to the trace and merged where they overlap.
std::vector<WorkloadTrace> replay_window(const WorkloadTrace& trace, const FailurePlan& plan, double margin_before,
                                         double margin_after);

/// Sub-trace covering [from, to) in absolute seconds, clipped to the trace.
WorkloadTrace slice(const WorkloadTrace& trace, int64_t from, int64_t to);

}  // namespace khaos::sim
