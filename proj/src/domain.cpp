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

#include "khaos/domain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <type_traits>

namespace khaos {

namespace {

constexpr double kGridTolerance = 1e-9;

std::string indexed(const std::string& field, size_t i) { return field + "[" + std::to_string(i) + "]"; }

}  // namespace

int64_t WorkloadTrace::peak() const {
  return counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
}

ConfigGrid ConfigGrid::make(double ci_min, double ci_max, size_t z) {
  if (!(ci_min > 0.0) || !(ci_max > ci_min)) {
    throw ParameterError("config grid requires 0 < ci_min < ci_max");
  }
  if (z < 2) {
    throw ParameterError("config grid requires z >= 2");
  }
  ConfigGrid grid{ci_min, ci_max, {}};
  grid.values.reserve(z);
  const double step = (ci_max - ci_min) / static_cast<double>(z - 1);
  for (size_t i = 0; i + 1 < z; ++i) {
    grid.values.push_back(ci_min + step * static_cast<double>(i));
  }
  grid.values.push_back(ci_max);
  return grid;
}

ConfigGrid ConfigGrid::parse(const std::string& text) {
  std::istringstream in(text);
  double lo = 0.0;
  double hi = 0.0;
  size_t z = 0;
  char sep1 = 0;
  char sep2 = 0;
  if (!(in >> lo >> sep1 >> hi >> sep2 >> z) || sep1 != ':' || sep2 != ':' || !in.eof()) {
    throw ParameterError("grid must look like min:max:z, got '" + text + "'");
  }
  return make(lo, hi, z);
}

size_t ProfilingMatrix::invalid_cells() const {
  size_t n = 0;
  for (const auto& row : invalid_reasons) {
    n += static_cast<size_t>(std::count_if(row.begin(), row.end(), [](const auto& r) { return !r.empty(); }));
  }
  return n;
}

Violations validate(const WorkloadTrace& trace) {
  Violations out;
  if (trace.duration_k() < 2) {
    out.push_back({"counts", "duration_k >= 2"});
  }
  for (size_t i = 0; i < trace.counts.size(); ++i) {
    if (trace.counts[i] < 0) {
      out.push_back({indexed("counts", i), "count >= 0"});
    }
  }
  return out;
}

Violations validate(const FailurePlan& plan) {
  Violations out;
  if (plan.m() < 2) {
    out.push_back({"m", "m >= 2"});
  }
  for (size_t i = 0; i < plan.points.size(); ++i) {
    const auto& p = plan.points[i];
    if (!std::isfinite(p.rate) || p.rate < 0.0) {
      out.push_back({indexed("points", i) + ".rate", "rate finite and >= 0"});
    }
    if (i > 0 && p.timestamp <= plan.points[i - 1].timestamp) {
      out.push_back({indexed("points", i) + ".timestamp", "timestamps strictly increasing"});
    }
  }
  return out;
}

Violations validate(const FailurePlan& plan, const WorkloadTrace& trace, double min_rate, double max_rate) {
  Violations out = validate(plan);
  for (size_t i = 0; i < plan.points.size(); ++i) {
    const auto& p = plan.points[i];
    if (p.timestamp < trace.start_time || p.timestamp >= trace.end_time()) {
      out.push_back({indexed("points", i) + ".timestamp", "timestamp within trace range"});
    }
    if (p.rate < min_rate - kGridTolerance || p.rate > max_rate + kGridTolerance) {
      out.push_back({indexed("points", i) + ".rate", "rate within smoothed workload range"});
    }
  }
  return out;
}

Violations validate(const ConfigGrid& grid) {
  Violations out;
  if (!(grid.ci_min > 0.0) || !(grid.ci_max > grid.ci_min)) {
    out.push_back({"ci_min", "0 < ci_min < ci_max"});
  }
  if (grid.z() < 2) {
    out.push_back({"z", "z >= 2"});
    return out;
  }
  if (std::abs(grid.values.front() - grid.ci_min) > kGridTolerance) {
    out.push_back({"values[0]", "values[0] = ci_min"});
  }
  if (std::abs(grid.values.back() - grid.ci_max) > kGridTolerance) {
    out.push_back({indexed("values", grid.z() - 1), "values[z-1] = ci_max"});
  }
  const double step = (grid.ci_max - grid.ci_min) / static_cast<double>(grid.z() - 1);
  for (size_t i = 1; i < grid.z(); ++i) {
    if (std::abs((grid.values[i] - grid.values[i - 1]) - step) > kGridTolerance) {
      out.push_back({indexed("values", i), "values equidistant"});
    }
  }
  return out;
}

Violations validate(const QoSConstraints& constraints) {
  Violations out;
  if (!(constraints.l_const > 0.0)) {
    out.push_back({"l_const", "l_const > 0"});
  }
  if (!(constraints.r_const > 0.0)) {
    out.push_back({"r_const", "r_const > 0"});
  }
  return out;
}

Violations validate(const std::vector<MetricsSample>& series) {
  Violations out;
  for (size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const std::string at = indexed("metrics", i);
    if (s.t < 0.0 || s.input_throughput < 0.0 || s.consumer_lag < 0.0 || s.avg_latency < 0.0) {
      out.push_back({at, "all fields >= 0"});
    }
    if (i > 0 && s.t <= series[i - 1].t) {
      out.push_back({at + ".t", "t strictly increasing"});
    }
  }
  return out;
}

Violations validate(const ProfilingMatrix& matrix) {
  Violations out = validate(matrix.grid);
  auto plan_violations = validate(matrix.plan);
  out.insert(out.end(), plan_violations.begin(), plan_violations.end());
  const size_t m = matrix.plan.m();
  const size_t z = matrix.grid.z();
  auto check = [&](const auto& cells, const std::string& name) {
    if (cells.size() != m) {
      out.push_back({name, "row count equals m"});
      return;
    }
    for (size_t i = 0; i < m; ++i) {
      if (cells[i].size() != z) {
        out.push_back({indexed(name, i), "column count equals z"});
        continue;
      }
      for (size_t j = 0; j < z; ++j) {
        if constexpr (std::is_same_v<std::decay_t<decltype(cells[i][j])>, std::optional<double>>) {
          if (cells[i][j] && (!std::isfinite(*cells[i][j]) || *cells[i][j] < 0.0)) {
            out.push_back({indexed(name, i) + "[" + std::to_string(j) + "]", "finite and >= 0"});
          }
        }
      }
    }
  };
  check(matrix.latencies, "latencies");
  check(matrix.recoveries, "recoveries");
  check(matrix.invalid_reasons, "invalid_reasons");
  return out;
}

std::string describe(const Violations& violations) {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) {
      out += "; ";
    }
    out += v.path + ": " + v.message;
  }
  return out;
}

}  // namespace khaos
