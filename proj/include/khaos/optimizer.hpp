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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "khaos/domain.hpp"
#include "khaos/modeling.hpp"
#include "khaos/pipeline_sim.hpp"

namespace khaos::optimizer {

enum class DecisionKind { NoViolation, Deferred, Reconfigure, InfeasibleKeepCurrent };

std::string to_string(DecisionKind kind);
DecisionKind parse_decision_kind(const std::string& name);

/// Fitted latency (M_L) and recovery (M_R) models.
struct Models {
  modeling::RegressionModel latency;
  modeling::RegressionModel recovery;
};

struct ViolationStatus {
  bool latency_violated = false;
  bool recovery_violated = false;
  double observed_latency = 0.0;    // ms, window mean
  double predicted_recovery = 0.0;  // s, M_R at the current ci
  double tr_avg = 0.0;              // events/s, window mean input rate

  [[nodiscard]] bool any() const { return latency_violated || recovery_violated; }
};

/// Strict comparisons: a window averaging exactly l_const is not a violation.
ViolationStatus detect_violation(std::span<const MetricsSample> window, const Models& models,
                                 const QoSConstraints& constraints, double current_ci);

/// q_r + q_l* + |q_r - q_l*| when both fractions lie in (0, 1), otherwise nullopt.
std::optional<double> evaluate_objective(double q_r, double q_l_star);

struct Candidate {
  double ci = 0.0;
  double q_r = 0.0;
  double q_l_star = 0.0;
  std::optional<double> objective;
};

Candidate evaluate_candidate(const Models& models, double p, double tr_avg, const QoSConstraints& constraints,
                             double ci);

/// Feasible grid value with the smallest objective; ties go to the larger ci.
std::optional<Candidate> select_ci(const ConfigGrid& grid, const Models& models, double p, double tr_avg,
                                   const QoSConstraints& constraints);

inline constexpr double kDeferralDrop = 0.10;

/// Relative drop of the mean forecast below the current rate.
double forecast_drop(double current_rate, std::span<const double> forecast);

struct OptimizerDecision {
  double t = 0.0;
  DecisionKind kind = DecisionKind::NoViolation;
  std::optional<double> new_ci;  // Reconfigure only
  double q_r = 0.0;              // at new_ci for Reconfigure, else at the current ci
  double q_l_star = 0.0;
  double forecast_drop = 0.0;
  double tr_avg = 0.0;
  // Inputs needed to replay the decision.
  double current_ci = 0.0;
  double p = 1.0;
  double observed_latency = 0.0;
  bool latency_violated = false;
  bool recovery_violated = false;
  bool forecast_cold = false;

  bool operator==(const OptimizerDecision&) const = default;
};

/// Applies the decision rule. drop is nullopt when the forecaster was cold
/// (treated as 0). A selection that does not strictly beat the current ci
/// keeps it.
OptimizerDecision decide(const ViolationStatus& violations, std::optional<double> drop,
                         const std::optional<Candidate>& selection, const Candidate& current);

/// Recomputes a logged decision from its recorded inputs.
OptimizerDecision replay(const OptimizerDecision& logged, const Models& models, const ConfigGrid& grid,
                         const QoSConstraints& constraints);

struct ControlOptions {
  double cycle_period = 60.0;  // s
  double window = 120.0;       // s of metrics per cycle
  size_t rescale_window_k = 5;
  modeling::ForecastOptions forecast;

  bool operator==(const ControlOptions&) const = default;
};

Violations validate(const ControlOptions& options);

struct ControlResult {
  std::vector<OptimizerDecision> decisions;
  size_t reconfigurations = 0;
};

/// Drives sim to the end of its trace, running one optimization cycle every
/// cycle_period seconds and issuing controlled restarts on Reconfigure. The
/// forecaster is fed the arrival rate of every simulated second. Cycles that
/// fall into downtime or catch-up after a failure or restart are skipped, and
/// the metrics window never reaches back past the last catch-up.
ControlResult control_loop(sim::Simulator& sim, const Models& models, modeling::ForecastModel& forecaster,
                           const QoSConstraints& constraints, const ConfigGrid& grid,
                           const ControlOptions& options = {});

}  // namespace khaos::optimizer
