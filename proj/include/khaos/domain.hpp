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
#include <stdexcept>
#include <string>
#include <vector>

namespace khaos {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument combination or out-of-range parameter.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot support the requested computation
/// (constant workload, collinear design, too few samples).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Not enough samples to warm up an online model.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file or document.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Per-second event counts over a recording period.
struct WorkloadTrace {
  int64_t start_time = 0;
  std::vector<int64_t> counts;

  [[nodiscard]] int64_t duration_k() const { return static_cast<int64_t>(counts.size()); }
  [[nodiscard]] int64_t end_time() const { return start_time + duration_k(); }
  [[nodiscard]] bool contains(double t) const {
    return t >= static_cast<double>(start_time) && t < static_cast<double>(end_time());
  }
  /// Workload W(t): events arriving in second t (absolute time).
  [[nodiscard]] int64_t at(int64_t t) const { return counts.at(static_cast<size_t>(t - start_time)); }
  [[nodiscard]] int64_t peak() const;

  bool operator==(const WorkloadTrace&) const = default;
};

struct FailurePoint {
  int64_t timestamp = 0;
  double rate = 0.0;  // events/s, smoothed workload at timestamp

  bool operator==(const FailurePoint&) const = default;
};

/// Failure timestamps F with their throughput rates TR.
struct FailurePlan {
  std::vector<FailurePoint> points;

  [[nodiscard]] size_t m() const { return points.size(); }
  bool operator==(const FailurePlan&) const = default;
};

/// z equidistant checkpoint intervals in [ci_min, ci_max].
struct ConfigGrid {
  double ci_min = 0.0;
  double ci_max = 0.0;
  std::vector<double> values;

  [[nodiscard]] size_t z() const { return values.size(); }

  /// Builds the grid; throws ParameterError unless 0 < ci_min < ci_max and z >= 2.
  static ConfigGrid make(double ci_min, double ci_max, size_t z);
  /// Parses "min:max:z", e.g. "10:120:5".
  static ConfigGrid parse(const std::string& text);

  bool operator==(const ConfigGrid&) const = default;
};

struct QoSConstraints {
  double l_const = 1000.0;  // ms
  double r_const = 240.0;   // s

  bool operator==(const QoSConstraints&) const = default;
};

struct MetricsSample {
  double t = 0.0;                 // s
  double input_throughput = 0.0;  // events/s consumed by the sources
  double consumer_lag = 0.0;      // events
  double avg_latency = 0.0;       // ms

  bool operator==(const MetricsSample&) const = default;
};

/// Latency set L and recovery set R indexed by (failure i, configuration j).
/// Missing cells (detection miss, no catch-up) are empty optionals and carry a reason.
struct ProfilingMatrix {
  std::vector<std::vector<std::optional<double>>> latencies;   // m x z, ms
  std::vector<std::vector<std::optional<double>>> recoveries;  // m x z, s
  std::vector<std::vector<std::string>> invalid_reasons;       // m x z, empty when valid
  ConfigGrid grid;
  FailurePlan plan;

  [[nodiscard]] size_t invalid_cells() const;
  bool operator==(const ProfilingMatrix&) const = default;
};

/// One violated invariant, addressed by a field path such as "points[3].rate".
struct Violation {
  std::string path;
  std::string message;
};

using Violations = std::vector<Violation>;

Violations validate(const WorkloadTrace& trace);
Violations validate(const FailurePlan& plan);
/// Also checks the plan against the trace range and the smoothed rate bounds.
Violations validate(const FailurePlan& plan, const WorkloadTrace& trace, double min_rate, double max_rate);
Violations validate(const ConfigGrid& grid);
Violations validate(const QoSConstraints& constraints);
Violations validate(const std::vector<MetricsSample>& series);
Violations validate(const ProfilingMatrix& matrix);

/// Joins violations into a single human-readable message.
std::string describe(const Violations& violations);

}  // namespace khaos
