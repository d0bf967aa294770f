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
#include <optional>
#include <vector>

#include "khaos/anomaly.hpp"
#include "khaos/domain.hpp"
#include "khaos/pipeline_sim.hpp"

namespace khaos::profiler {

/// More than the tolerated fraction of profiling cells came back invalid.
class ProfilingFailedError : public Error {
 public:
  using Error::Error;
};

enum class InjectionAnchor {
  Completion,  // just before the next checkpoint completes (worst case)
  Start,       // just before the next checkpoint is scheduled to start
};

/// Worst-case injection time for a deployment whose checkpoints start at
/// origin + n * ci (n >= 1) and complete checkpoint_duration later: the first
/// completion strictly after nominal_time, minus epsilon. With the Start
/// anchor, the first start strictly after nominal_time, minus epsilon.
double schedule_worst_case_injection(double ci, double checkpoint_duration, double checkpoint_schedule_origin,
                                     double nominal_time, double epsilon,
                                     InjectionAnchor anchor = InjectionAnchor::Completion);

struct ProfilingOptions {
  double margin_before = 300.0;  // s replayed before each failure point
  double margin_after = 900.0;   // s replayed after each failure point
  double epsilon = 1.0;
  double latency_window = 60.0;  // s averaged before the injection
  double max_invalid_fraction = 0.2;
  InjectionAnchor anchor = InjectionAnchor::Completion;
  anomaly::DetectorConfig detector;
  // 0 = one worker per hardware thread.
  unsigned threads = 0;

  bool operator==(const ProfilingOptions&) const = default;
};

/// Replays a window of the trace around every failure point on one simulated
/// deployment per configuration, injects a worst-case failure and records the
/// pre-failure average latency and the anomaly-measured recovery time.
/// Cells are independent and evaluated in parallel; the result does not depend
/// on scheduling. Throws ProfilingFailedError when too many cells are invalid.
ProfilingMatrix run_profiling(const WorkloadTrace& trace, const FailurePlan& plan, const ConfigGrid& grid,
                              const sim::PipelineSpec& spec, const ProfilingOptions& options, uint64_t seed);

/// Flattened (rate, ci, latency, recovery) training row; missing cells stay empty.
struct ProfilingRow {
  double rate = 0.0;
  double ci = 0.0;
  std::optional<double> latency;
  std::optional<double> recovery;
};

std::vector<ProfilingRow> flatten(const ProfilingMatrix& matrix);

}  // namespace khaos::profiler
