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

#include "khaos/profiler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "khaos/random.hpp"

namespace khaos::profiler {

double schedule_worst_case_injection(double ci, double checkpoint_duration, double checkpoint_schedule_origin,
                                     double nominal_time, double epsilon, InjectionAnchor anchor) {
  if (!(ci > 0.0)) {
    throw ParameterError("ci must be > 0");
  }
  if (!(epsilon > 0.0) || !(epsilon < ci)) {
    throw ParameterError("epsilon must lie in (0, ci)");
  }
  const double offset = anchor == InjectionAnchor::Completion ? checkpoint_duration : 0.0;
  // Smallest n >= 1 with origin + n * ci + offset > nominal.
  double n = std::floor((nominal_time - checkpoint_schedule_origin - offset) / ci) + 1.0;
  n = std::max(n, 1.0);
  double anchor_time = checkpoint_schedule_origin + n * ci + offset;
  if (anchor_time <= nominal_time) {
    anchor_time += ci;
  }
  return anchor_time - epsilon;
}

namespace {

struct CellResult {
  std::optional<double> latency;
  std::optional<double> recovery;
  std::string reason;
};

CellResult profile_cell(const WorkloadTrace& trace, const FailurePoint& point, double ci,
                        const sim::PipelineSpec& spec, const ProfilingOptions& options, uint64_t seed) {
  CellResult cell;
  const auto from = point.timestamp - static_cast<int64_t>(std::ceil(options.margin_before));
  const auto to = point.timestamp + static_cast<int64_t>(std::ceil(options.margin_after));
  const WorkloadTrace segment = sim::slice(trace, from, to);
  const double origin = static_cast<double>(segment.start_time);
  const double inject = schedule_worst_case_injection(ci, spec.checkpoint_duration, origin,
                                                      static_cast<double>(point.timestamp), options.epsilon,
                                                      options.anchor);
  if (!segment.contains(inject)) {
    cell.reason = "injection falls outside the replay window";
    return cell;
  }

  const sim::SimRun run = sim::run(spec, segment, ci, {inject}, {}, seed);

  double sum = 0.0;
  size_t n = 0;
  for (const auto& s : run.metrics) {
    if (s.t > inject - options.latency_window && s.t <= inject) {
      sum += s.avg_latency;
      ++n;
    }
  }
  if (n > 0) {
    cell.latency = sum / static_cast<double>(n);
  }

  if (!run.recovery_times().front()) {
    cell.reason = "job did not catch up within the replay window";
    return cell;
  }
  try {
    cell.recovery = anomaly::measure_recovery(options.detector, run.metrics, inject, 2.0 * spec.detection_timeout);
  } catch (const anomaly::DetectionMissError& e) {
    cell.reason = std::string("detection miss: ") + e.what();
  } catch (const InsufficientDataError& e) {
    cell.reason = std::string("detector warmup: ") + e.what();
  }
  if (!cell.latency && cell.reason.empty()) {
    cell.reason = "no metrics before the injection";
  }
  return cell;
}

}  // namespace

ProfilingMatrix run_profiling(const WorkloadTrace& trace, const FailurePlan& plan, const ConfigGrid& grid,
                              const sim::PipelineSpec& spec, const ProfilingOptions& options, uint64_t seed) {
  if (auto v = validate(plan); !v.empty()) throw ParameterError("invalid failure plan: " + describe(v));
  if (auto v = validate(grid); !v.empty()) throw ParameterError("invalid grid: " + describe(v));
  for (const auto& p : plan.points) {
    if (!trace.contains(static_cast<double>(p.timestamp))) {
      throw ParameterError("failure point " + std::to_string(p.timestamp) + " lies outside the trace");
    }
  }

  const size_t m = plan.m();
  const size_t z = grid.z();
  std::vector<CellResult> cells(m * z);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t idx = next++; idx < cells.size(); idx = next++) {
      const size_t i = idx / z;
      const size_t j = idx % z;
      cells[idx] = profile_cell(trace, plan.points[i], grid.values[j], spec, options, derive_seed(seed, idx));
    }
  };
  unsigned threads = options.threads != 0 ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(cells.size()));
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();

  ProfilingMatrix matrix;
  matrix.grid = grid;
  matrix.plan = plan;
  matrix.latencies.assign(m, std::vector<std::optional<double>>(z));
  matrix.recoveries.assign(m, std::vector<std::optional<double>>(z));
  matrix.invalid_reasons.assign(m, std::vector<std::string>(z));
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < z; ++j) {
      auto& cell = cells[i * z + j];
      matrix.latencies[i][j] = cell.latency;
      matrix.recoveries[i][j] = cell.recovery;
      matrix.invalid_reasons[i][j] = std::move(cell.reason);
    }
  }
  const double invalid = static_cast<double>(matrix.invalid_cells()) / static_cast<double>(m * z);
  if (invalid > options.max_invalid_fraction) {
    std::string first;
    for (const auto& row : matrix.invalid_reasons) {
      for (const auto& r : row) {
        if (!r.empty() && first.empty()) first = r;
      }
    }
    throw ProfilingFailedError(std::to_string(matrix.invalid_cells()) + " of " + std::to_string(m * z) +
                               " profiling cells are invalid (first: " + first + ")");
  }
  return matrix;
}

std::vector<ProfilingRow> flatten(const ProfilingMatrix& matrix) {
  std::vector<ProfilingRow> rows;
  for (size_t i = 0; i < matrix.plan.m(); ++i) {
    for (size_t j = 0; j < matrix.grid.z(); ++j) {
      rows.push_back({matrix.plan.points[i].rate, matrix.grid.values[j], matrix.latencies[i][j],
                      matrix.recoveries[i][j]});
    }
  }
  return rows;
}

}  // namespace khaos::profiler
