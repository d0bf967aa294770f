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

#include "khaos/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace khaos::optimizer {

std::string to_string(DecisionKind kind) {
  switch (kind) {
    case DecisionKind::NoViolation: return "NoViolation";
    case DecisionKind::Deferred: return "Deferred";
    case DecisionKind::Reconfigure: return "Reconfigure";
    case DecisionKind::InfeasibleKeepCurrent: return "InfeasibleKeepCurrent";
  }
  return "NoViolation";
}

DecisionKind parse_decision_kind(const std::string& name) {
  for (auto kind : {DecisionKind::NoViolation, DecisionKind::Deferred, DecisionKind::Reconfigure,
                    DecisionKind::InfeasibleKeepCurrent}) {
    if (to_string(kind) == name) return kind;
  }
  throw FormatError("unknown decision kind '" + name + "'");
}

ViolationStatus detect_violation(std::span<const MetricsSample> window, const Models& models,
                                 const QoSConstraints& constraints, double current_ci) {
  if (window.empty()) {
    throw ParameterError("violation detection needs a nonempty metrics window");
  }
  ViolationStatus out;
  const double n = static_cast<double>(window.size());
  for (const auto& s : window) {
    out.observed_latency += s.avg_latency;
    out.tr_avg += s.input_throughput;
  }
  out.observed_latency /= n;
  out.tr_avg /= n;
  out.predicted_recovery = modeling::predict(models.recovery, current_ci, out.tr_avg);
  out.latency_violated = out.observed_latency > constraints.l_const;
  out.recovery_violated = out.predicted_recovery > constraints.r_const;
  return out;
}

std::optional<double> evaluate_objective(double q_r, double q_l_star) {
  if (!(q_r > 0.0 && q_r < 1.0 && q_l_star > 0.0 && q_l_star < 1.0)) return std::nullopt;
  return q_r + q_l_star + std::abs(q_r - q_l_star);
}

Candidate evaluate_candidate(const Models& models, double p, double tr_avg, const QoSConstraints& constraints,
                             double ci) {
  Candidate c;
  c.ci = ci;
  c.q_r = modeling::predict(models.recovery, ci, tr_avg) / constraints.r_const;
  c.q_l_star = p * modeling::predict(models.latency, ci, tr_avg) / constraints.l_const;
  c.objective = evaluate_objective(c.q_r, c.q_l_star);
  return c;
}

std::optional<Candidate> select_ci(const ConfigGrid& grid, const Models& models, double p, double tr_avg,
                                   const QoSConstraints& constraints) {
  if (!(p > 0.0)) {
    throw ParameterError("rescaling factor p must be > 0");
  }
  std::optional<Candidate> best;
  for (double ci : grid.values) {
    Candidate c = evaluate_candidate(models, p, tr_avg, constraints, ci);
    if (!c.objective) continue;
    if (!best || *c.objective < *best->objective || (*c.objective == *best->objective && c.ci > best->ci)) {
      best = c;
    }
  }
  return best;
}

double forecast_drop(double current_rate, std::span<const double> forecast) {
  if (forecast.empty() || !(current_rate > 0.0)) return 0.0;
  const double mean = std::accumulate(forecast.begin(), forecast.end(), 0.0) / static_cast<double>(forecast.size());
  return (current_rate - mean) / current_rate;
}

OptimizerDecision decide(const ViolationStatus& violations, std::optional<double> drop,
                         const std::optional<Candidate>& selection, const Candidate& current) {
  OptimizerDecision d;
  d.current_ci = current.ci;
  d.q_r = current.q_r;
  d.q_l_star = current.q_l_star;
  d.tr_avg = violations.tr_avg;
  d.observed_latency = violations.observed_latency;
  d.latency_violated = violations.latency_violated;
  d.recovery_violated = violations.recovery_violated;
  d.forecast_cold = !drop.has_value();
  d.forecast_drop = drop.value_or(0.0);

  if (!violations.any()) {
    d.kind = DecisionKind::NoViolation;
    return d;
  }
  if (d.forecast_drop > kDeferralDrop) {
    d.kind = DecisionKind::Deferred;
    return d;
  }
  if (selection && (!current.objective || *selection->objective < *current.objective)) {
    d.kind = DecisionKind::Reconfigure;
    d.new_ci = selection->ci;
    d.q_r = selection->q_r;
    d.q_l_star = selection->q_l_star;
    return d;
  }
  d.kind = DecisionKind::InfeasibleKeepCurrent;
  return d;
}

OptimizerDecision replay(const OptimizerDecision& logged, const Models& models, const ConfigGrid& grid,
                         const QoSConstraints& constraints) {
  ViolationStatus v;
  v.latency_violated = logged.latency_violated;
  v.recovery_violated = logged.recovery_violated;
  v.observed_latency = logged.observed_latency;
  v.tr_avg = logged.tr_avg;
  v.predicted_recovery = modeling::predict(models.recovery, logged.current_ci, logged.tr_avg);
  std::optional<double> drop;
  if (!logged.forecast_cold) drop = logged.forecast_drop;
  std::optional<Candidate> selection;
  if (v.any()) selection = select_ci(grid, models, logged.p, logged.tr_avg, constraints);
  const Candidate current = evaluate_candidate(models, logged.p, logged.tr_avg, constraints, logged.current_ci);
  OptimizerDecision d = decide(v, drop, selection, current);
  d.t = logged.t;
  d.p = logged.p;
  return d;
}

Violations validate(const ControlOptions& o) {
  Violations out;
  if (!(o.cycle_period >= 1.0)) out.push_back({"cycle_period", "cycle_period >= 1"});
  if (!(o.window >= 1.0)) out.push_back({"window", "window >= 1"});
  if (o.rescale_window_k < 1) out.push_back({"rescale_window_k", "rescale_window_k >= 1"});
  if (o.forecast.ar_order < 1) out.push_back({"forecast.ar_order", "ar_order >= 1"});
  if (!(o.forecast.learning_rate >= 0.0)) out.push_back({"forecast.learning_rate", "learning_rate >= 0"});
  return out;
}

ControlResult control_loop(sim::Simulator& sim, const Models& models, modeling::ForecastModel& forecaster,
                           const QoSConstraints& constraints, const ConfigGrid& grid, const ControlOptions& options) {
  if (auto v = validate(options); !v.empty()) {
    throw ParameterError("invalid control options: " + describe(v));
  }
  ControlResult result;
  modeling::RescaleState rescale(options.rescale_window_k);
  const auto& trace = sim.trace();
  auto fed = static_cast<int64_t>(std::floor(sim.now()));
  const auto horizon = static_cast<size_t>(std::llround(options.cycle_period));
  double next = sim.now() + options.cycle_period;

  while (!sim.finished()) {
    sim.advance_until(next);
    const auto now_s = static_cast<int64_t>(std::floor(sim.now()));
    for (; fed < now_s; ++fed) forecaster.observe(static_cast<double>(trace.at(fed)));
    if (sim.now() < next || sim.finished()) break;
    next += options.cycle_period;
    if (!sim.is_running() || sim.is_recovering()) continue;

    // Window starts no earlier than the last catch-up after a failure or restart.
    const auto& events = sim.events();
    const auto caught = std::find_if(events.rbegin(), events.rend(), [](const sim::SimEvent& e) {
      return e.kind == sim::EventKind::CaughtUp;
    });
    double from = sim.now() - options.window;
    if (caught != events.rend()) from = std::max(from, caught->t);
    const auto& metrics = sim.metrics();
    const auto first = std::find_if(metrics.begin(), metrics.end(),
                                    [from](const MetricsSample& s) { return s.t > from; });
    const std::span<const MetricsSample> window(first, metrics.end());
    if (window.empty()) continue;

    const double ci = sim.current_ci();
    const ViolationStatus v = detect_violation(window, models, constraints, ci);
    if (const double predicted = modeling::predict(models.latency, ci, v.tr_avg); predicted > 0.0) {
      rescale.update(v.observed_latency, predicted);
    }
    const double p = rescale.p();

    std::optional<double> drop;
    std::optional<Candidate> selection;
    if (v.any()) {
      if (forecaster.warm()) {
        const auto forecast = forecaster.forecast(horizon);
        drop = forecast_drop(static_cast<double>(trace.at(now_s - 1)), forecast);
      }
      selection = select_ci(grid, models, p, v.tr_avg, constraints);
    }
    OptimizerDecision d = decide(v, drop, selection, evaluate_candidate(models, p, v.tr_avg, constraints, ci));
    d.t = sim.now();
    d.p = p;
    if (d.kind == DecisionKind::Reconfigure) {
      sim.reconfigure(sim.now(), *d.new_ci);
      ++result.reconfigurations;
    }
    result.decisions.push_back(d);
  }
  return result;
}

}  // namespace khaos::optimizer
