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

#include "khaos/pipeline_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace khaos::sim {

namespace {

constexpr double kTimeEps = 1e-9;
constexpr double kBandFractionOfInput = 0.01;

}  // namespace

PipelineSpec PipelineSpec::defaults_for(const WorkloadTrace& trace) {
  PipelineSpec spec;
  spec.capacity_mu = 2.0 * static_cast<double>(std::max<int64_t>(trace.peak(), 1));
  return spec;
}

Violations validate(const PipelineSpec& spec) {
  Violations out;
  if (!(spec.capacity_mu > 0.0)) out.push_back({"capacity_mu", "capacity_mu > 0"});
  const std::pair<const char*, double> non_negative[] = {
      {"base_latency", spec.base_latency},
      {"queue_latency_coeff", spec.queue_latency_coeff},
      {"checkpoint_pause", spec.checkpoint_pause},
      {"checkpoint_duration", spec.checkpoint_duration},
      {"detection_timeout", spec.detection_timeout},
      {"restart_duration", spec.restart_duration},
      {"controlled_restart_downtime", spec.controlled_restart_downtime},
      {"checkpoint_latency_factor", spec.checkpoint_latency_factor},
  };
  for (const auto& [name, value] : non_negative) {
    if (!(value >= 0.0) || !std::isfinite(value)) out.push_back({name, std::string(name) + " >= 0"});
  }
  return out;
}

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::CheckpointStarted:
      return "CheckpointStarted";
    case EventKind::CheckpointCompleted:
      return "CheckpointCompleted";
    case EventKind::FailureInjected:
      return "FailureInjected";
    case EventKind::ProcessingResumed:
      return "ProcessingResumed";
    case EventKind::CaughtUp:
      return "CaughtUp";
    case EventKind::Reconfigured:
      return "Reconfigured";
  }
  return "Unknown";
}

EventKind parse_event_kind(const std::string& name) {
  for (auto kind : {EventKind::CheckpointStarted, EventKind::CheckpointCompleted, EventKind::FailureInjected,
                    EventKind::ProcessingResumed, EventKind::CaughtUp, EventKind::Reconfigured}) {
    if (to_string(kind) == name) return kind;
  }
  throw FormatError("unknown event kind '" + name + "'");
}

std::vector<SimEvent> SimRun::events_of(EventKind kind) const {
  std::vector<SimEvent> out;
  std::copy_if(events.begin(), events.end(), std::back_inserter(out), [kind](const SimEvent& e) { return e.kind == kind; });
  return out;
}

std::vector<std::optional<double>> SimRun::recovery_times() const {
  std::vector<std::optional<double>> out;
  for (size_t i = 0; i < events.size(); ++i) {
    if (events[i].kind != EventKind::FailureInjected) continue;
    const auto caught = std::find_if(events.begin() + static_cast<std::ptrdiff_t>(i), events.end(),
                                     [](const SimEvent& e) { return e.kind == EventKind::CaughtUp; });
    if (caught == events.end()) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(caught->t - events[i].t);
    }
  }
  return out;
}

Simulator::Simulator(PipelineSpec spec, WorkloadTrace trace, double ci, uint64_t seed)
    : spec_(spec), trace_(std::move(trace)), ci_(ci), now_(static_cast<double>(trace_.start_time)),
      schedule_origin_(now_) {
  if (!(ci > 0.0) || !std::isfinite(ci)) {
    throw ParameterError("checkpoint interval must be > 0");
  }
  if (auto v = validate(spec_); !v.empty()) {
    throw ParameterError("invalid pipeline spec: " + describe(v));
  }
  if (auto v = validate(trace_); !v.empty()) {
    throw ParameterError("invalid trace: " + describe(v));
  }
  run_.seed = seed;
  run_.metrics.reserve(trace_.counts.size());
}

void Simulator::inject_failure(double t) {
  if (!trace_.contains(t)) {
    throw ParameterError("failure injection at " + std::to_string(t) + " lies outside the trace");
  }
  if (t < now_ - kTimeEps) {
    throw ParameterError("failure injection lies in the past");
  }
  failures_.push_back({t, std::nullopt, 0.0});
}

void Simulator::request_worst_case_failure(double nominal, double epsilon) {
  if (!(epsilon > 0.0) || epsilon >= spec_.checkpoint_duration) {
    throw ParameterError("worst-case epsilon must lie in (0, checkpoint_duration)");
  }
  if (!trace_.contains(nominal)) {
    throw ParameterError("worst-case nominal time lies outside the trace");
  }
  worst_case_requests_.emplace_back(std::max(nominal, now_), epsilon);
}

void Simulator::reconfigure(double t, double new_ci) {
  if (!(new_ci > 0.0)) {
    throw ParameterError("new checkpoint interval must be > 0");
  }
  if (t < now_ - kTimeEps) {
    throw ParameterError("reconfiguration lies in the past");
  }
  ReconfigCommand cmd{t, new_ci};
  auto pos = std::upper_bound(reconfigs_.begin(), reconfigs_.end(), cmd,
                              [](const ReconfigCommand& a, const ReconfigCommand& b) { return a.t < b.t; });
  reconfigs_.insert(pos, cmd);
}

void Simulator::advance_until(double t) {
  while (!finished() && now_ < t - kTimeEps) {
    simulate_second();
  }
}

void Simulator::run_to_end() { advance_until(std::numeric_limits<double>::infinity()); }

double Simulator::next_checkpoint_start() const {
  return schedule_origin_ + static_cast<double>(schedule_n_) * ci_;
}

void Simulator::emit(double t, EventKind kind, double value) { run_.events.push_back({t, kind, value}); }

void Simulator::abort_checkpoint() {
  if (!inflight_) return;
  const uint64_t id = inflight_->id;
  for (auto it = failures_.begin(); it != failures_.end();) {
    if (it->checkpoint == id) {
      armed_worst_case_.push_back(it->epsilon);
      it = failures_.erase(it);
    } else {
      ++it;
    }
  }
  inflight_.reset();
}

void Simulator::start_checkpoint(double t) {
  inflight_ = Checkpoint{next_checkpoint_id_++, t, t + spec_.checkpoint_duration, offset_};
  stall_until_ = t + spec_.checkpoint_pause / 1000.0;
  emit(t, EventKind::CheckpointStarted, offset_);
  for (double eps : armed_worst_case_) {
    failures_.push_back({inflight_->completes - eps, inflight_->id, eps});
  }
  armed_worst_case_.clear();
}

void Simulator::fail(double t) {
  const double lag_before = lag();
  const auto second = static_cast<int64_t>(std::floor(t));
  const double input = trace_.contains(t) ? static_cast<double>(trace_.at(second)) : 0.0;
  const double band = std::max(lag_before, kBandFractionOfInput * input);
  band_ = band_ ? std::min(*band_, band) : band;
  emit(t, EventKind::FailureInjected, lag_before);

  abort_checkpoint();
  offset_ = last_completed_offset_;
  stall_until_ = -1.0;
  const double until = t + spec_.failure_downtime();
  down_until_ = down_until_ ? std::max(*down_until_, until) : until;
}

void Simulator::restart(double t, double downtime) {
  const auto second = static_cast<int64_t>(std::floor(t));
  const double input = trace_.contains(t) ? static_cast<double>(trace_.at(second)) : 0.0;
  const double band = std::max(lag(), kBandFractionOfInput * input);
  band_ = band_ ? std::min(*band_, band) : band;
  abort_checkpoint();
  last_completed_offset_ = offset_;
  stall_until_ = -1.0;
  const double until = t + downtime;
  down_until_ = down_until_ ? std::max(*down_until_, until) : until;
}

void Simulator::handle_events_at(double t) {
  const double horizon = t + kTimeEps;

  if (down_until_ && *down_until_ <= horizon) {
    down_until_.reset();
    if (pending_ci_) {
      ci_ = *pending_ci_;
      pending_ci_.reset();
    }
    schedule_origin_ = t;
    schedule_n_ = 1;
    emit(t, EventKind::ProcessingResumed, lag());
  }

  std::sort(failures_.begin(), failures_.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  while (!failures_.empty() && failures_.front().t <= horizon) {
    failures_.erase(failures_.begin());
    fail(t);
  }

  while (!reconfigs_.empty() && reconfigs_.front().t <= horizon) {
    const ReconfigCommand cmd = reconfigs_.front();
    reconfigs_.pop_front();
    restart(t, spec_.controlled_restart_downtime);
    pending_ci_ = cmd.new_ci;
    emit(t, EventKind::Reconfigured, cmd.new_ci);
  }

  if (is_running()) {
    if (inflight_ && inflight_->completes <= horizon) {
      last_completed_offset_ = inflight_->offset;
      emit(t, EventKind::CheckpointCompleted, inflight_->offset);
      inflight_.reset();
    }
    while (next_checkpoint_start() <= horizon) {
      if (!inflight_) {
        start_checkpoint(t);
      }
      ++schedule_n_;
    }
  }

  for (auto it = worst_case_requests_.begin(); it != worst_case_requests_.end();) {
    if (it->first > horizon) {
      ++it;
      continue;
    }
    const double eps = it->second;
    if (inflight_ && inflight_->completes > it->first && inflight_->completes - eps >= t) {
      failures_.push_back({inflight_->completes - eps, inflight_->id, eps});
    } else {
      armed_worst_case_.push_back(eps);
    }
    it = worst_case_requests_.erase(it);
  }

  if (band_ && is_running() && lag() <= *band_ + kTimeEps) {
    emit(t, EventKind::CaughtUp, lag());
    band_.reset();
  }
}

// Advances the fluid state over [from, to) at a constant input rate.
void Simulator::flow(double from, double to, double rate, double& consumed, double& lag_area) {
  const double dt = to - from;
  if (dt <= 0.0) return;
  const double lag0 = lag();
  const bool processing = is_running() && from >= stall_until_ - kTimeEps;
  produced_ += rate * dt;
  if (!processing) {
    lag_area += (lag0 + lag()) / 2.0 * dt;
    return;
  }

  const double mu = spec_.capacity_mu;
  double processed = 0.0;
  if (rate >= mu) {
    processed = mu * dt;
  } else if (lag0 <= 0.0) {
    processed = rate * dt;
  } else {
    const double drain = mu - rate;
    const double to_zero = lag0 / drain;
    if (band_ && lag0 > *band_) {
      const double to_band = (lag0 - *band_) / drain;
      if (to_band < dt) {
        emit(from + to_band, EventKind::CaughtUp, *band_);
        band_.reset();
      }
    }
    processed = to_zero >= dt ? mu * dt : mu * to_zero + rate * (dt - to_zero);
  }
  offset_ += processed;
  if (offset_ > produced_) offset_ = produced_;
  consumed += processed;

  const double lag1 = lag();
  if (rate < mu && lag0 > 0.0 && lag1 <= 0.0) {
    lag_area += lag0 / 2.0 * (lag0 / (mu - rate));
  } else {
    lag_area += (lag0 + lag1) / 2.0 * dt;
  }
}

void Simulator::simulate_second() {
  const double second_start = now_;
  const double second_end = std::floor(now_ + kTimeEps) + 1.0;
  const double rate = static_cast<double>(trace_.at(static_cast<int64_t>(std::floor(now_ + kTimeEps))));
  double consumed = 0.0;
  double lag_area = 0.0;

  while (now_ < second_end - kTimeEps) {
    handle_events_at(now_);
    double next = second_end;
    auto consider = [&](double t) {
      if (t > now_ + kTimeEps && t < next) next = t;
    };
    if (is_running()) {
      consider(next_checkpoint_start());
      if (inflight_) consider(inflight_->completes);
      consider(stall_until_);
    } else {
      consider(*down_until_);
    }
    for (const auto& f : failures_) consider(f.t);
    if (!reconfigs_.empty()) consider(reconfigs_.front().t);
    for (const auto& r : worst_case_requests_) consider(r.first);

    flow(now_, next, rate, consumed, lag_area);
    now_ = next;
  }
  now_ = second_end;

  const double span = second_end - second_start;
  const double mean_lag = span > 0.0 ? lag_area / span : lag();
  const double latency = spec_.base_latency + spec_.queue_latency_coeff * mean_lag +
                         spec_.checkpoint_latency_factor * spec_.checkpoint_pause / ci_;
  run_.metrics.push_back({second_end, consumed / span, std::max(0.0, lag()), latency});
}

SimRun run(const PipelineSpec& spec, const WorkloadTrace& trace, double ci, const std::vector<double>& injections,
           const std::vector<ReconfigCommand>& reconfig_commands, uint64_t seed) {
  Simulator sim(spec, trace, ci, seed);
  for (double t : injections) sim.inject_failure(t);
  for (const auto& cmd : reconfig_commands) sim.reconfigure(cmd.t, cmd.new_ci);
  sim.run_to_end();
  return sim.run();
}

double oracle_recovery_time(const PipelineSpec& spec, double rate_w, double ci) {
  if (!(spec.capacity_mu > rate_w)) {
    throw DegenerateError("capacity does not exceed the input rate; the job never catches up");
  }
  const double d = spec.failure_downtime();
  const double backlog = rate_w * (ci + d);
  return d + backlog / (spec.capacity_mu - rate_w);
}

WorkloadTrace slice(const WorkloadTrace& trace, int64_t from, int64_t to) {
  from = std::max(from, trace.start_time);
  to = std::min(to, trace.end_time());
  if (to <= from) {
    throw ParameterError("empty trace slice");
  }
  WorkloadTrace out{from, {}};
  out.counts.assign(trace.counts.begin() + (from - trace.start_time), trace.counts.begin() + (to - trace.start_time));
  return out;
}

std::vector<WorkloadTrace> replay_window(const WorkloadTrace& trace, const FailurePlan& plan, double margin_before,
                                         double margin_after) {
  if (margin_before < 0.0 || margin_after < 0.0) {
    throw ParameterError("replay margins must be >= 0");
  }
  std::vector<std::pair<int64_t, int64_t>> spans;
  for (const auto& p : plan.points) {
    const auto lo = std::max(trace.start_time, p.timestamp - static_cast<int64_t>(std::ceil(margin_before)));
    const auto hi = std::min(trace.end_time(), p.timestamp + static_cast<int64_t>(std::ceil(margin_after)));
    if (hi > lo) spans.emplace_back(lo, hi);
  }
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<int64_t, int64_t>> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, s.second);
    } else {
      merged.push_back(s);
    }
  }
  std::vector<WorkloadTrace> out;
  out.reserve(merged.size());
  for (const auto& [lo, hi] : merged) out.push_back(slice(trace, lo, hi));
  return out;
}

}  // namespace khaos::sim
