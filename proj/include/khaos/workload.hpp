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
#include <string>
#include <vector>

#include "khaos/domain.hpp"

namespace khaos::workload {

enum class TraceKind { Sinusoidal, Diurnal, RandomWalk, Constant };

TraceKind parse_trace_kind(const std::string& name);
std::string to_string(TraceKind kind);

struct GeneratorParams {
  TraceKind kind = TraceKind::Sinusoidal;
  int64_t duration_k = 3600;
  double base_rate = 1000.0;
  double amplitude = 0.0;
  uint64_t seed = 0;
  // Cycle length in seconds for sinusoidal (one full cycle when 0) and the
  // length of one "day" for diurnal (duration_k / 7 when 0).
  int64_t period = 0;
  // Relative per-second jitter; counts are always clipped to the bounds.
  double noise = 0.02;
  int64_t start_time = 0;

  bool operator==(const GeneratorParams&) const = default;
};

/// Synthesizes a per-second trace. Deterministic for a given seed.
/// Sinusoidal and diurnal traces stay within [base - amplitude, base + amplitude].
WorkloadTrace generate_trace(const GeneratorParams& params);

/// Centered moving average over a trace, windows truncated at the edges.
struct SmoothedWorkload {
  WorkloadTrace source;
  int64_t window_w = 1;
  std::vector<double> values;

  [[nodiscard]] double at(int64_t t) const { return values.at(static_cast<size_t>(t - source.start_time)); }
  [[nodiscard]] double min() const;
  [[nodiscard]] double max() const;
};

inline constexpr int64_t kDefaultSmoothingWindow = 61;

SmoothedWorkload smooth(const WorkloadTrace& trace, int64_t window_w = kDefaultSmoothingWindow);

enum class FailureMode { RateEquidistant, TimeEquidistant };

FailureMode parse_failure_mode(const std::string& name);
std::string to_string(FailureMode mode);

/// Picks m failure points over the smoothed workload.
///
/// RateEquidistant spaces target rates evenly between the minimum and maximum
/// smoothed rate and maps each to the timestamp whose smoothed rate is nearest
/// (earliest on ties, next-nearest when a timestamp is already taken).
/// TimeEquidistant spaces timestamps evenly between argmin and argmax with a
/// floored step and the last point forced onto argmax.
FailurePlan extract_failure_points(const SmoothedWorkload& sw, size_t m,
                                   FailureMode mode = FailureMode::RateEquidistant);

/// Earliest argmin / argmax of the smoothed series, as absolute timestamps.
int64_t argmin_time(const SmoothedWorkload& sw);
int64_t argmax_time(const SmoothedWorkload& sw);

}  // namespace khaos::workload
