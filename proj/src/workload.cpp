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

#include "khaos/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "khaos/random.hpp"

namespace khaos::workload {

TraceKind parse_trace_kind(const std::string& name) {
  if (name == "sinusoidal") return TraceKind::Sinusoidal;
  if (name == "diurnal") return TraceKind::Diurnal;
  if (name == "random-walk") return TraceKind::RandomWalk;
  if (name == "constant") return TraceKind::Constant;
  throw ParameterError("unknown trace kind '" + name + "'");
}

std::string to_string(TraceKind kind) {
  switch (kind) {
    case TraceKind::Sinusoidal:
      return "sinusoidal";
    case TraceKind::Diurnal:
      return "diurnal";
    case TraceKind::RandomWalk:
      return "random-walk";
    case TraceKind::Constant:
      return "constant";
  }
  return "unknown";
}

namespace {

// Two-humped daily profile in [-1, 1]: trough at midnight, rush-hour peaks.
double daily_shape(double phase) {
  const double two_pi = 2.0 * std::numbers::pi;
  return -0.65 * std::cos(two_pi * phase) - 0.35 * std::cos(2.0 * two_pi * phase);
}

int64_t clip_count(double value, double lo, double hi) {
  return static_cast<int64_t>(std::llround(std::clamp(value, std::max(0.0, lo), hi)));
}

}  // namespace

WorkloadTrace generate_trace(const GeneratorParams& p) {
  if (p.duration_k < 2) {
    throw ParameterError("duration_k must be >= 2");
  }
  if (!(p.base_rate >= 0.0) || !(p.amplitude >= 0.0) || !(p.noise >= 0.0)) {
    throw ParameterError("base_rate, amplitude and noise must be >= 0");
  }
  if (p.kind != TraceKind::Constant && p.amplitude > p.base_rate) {
    throw ParameterError("bounded traces require base_rate >= amplitude");
  }
  if (p.period < 0) {
    throw ParameterError("period must be >= 0");
  }

  WorkloadTrace trace{p.start_time, {}};
  trace.counts.reserve(static_cast<size_t>(p.duration_k));
  Rng rng(p.seed);
  const double lo = p.base_rate - p.amplitude;
  const double hi = p.base_rate + p.amplitude;

  switch (p.kind) {
    case TraceKind::Constant:
      trace.counts.assign(static_cast<size_t>(p.duration_k), std::llround(p.base_rate));
      break;
    case TraceKind::Sinusoidal: {
      const double period = static_cast<double>(p.period > 0 ? p.period : p.duration_k);
      for (int64_t t = 0; t < p.duration_k; ++t) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / period;
        const double value = p.base_rate + p.amplitude * std::sin(phase) + p.noise * p.base_rate * rng.normal();
        trace.counts.push_back(clip_count(value, lo, hi));
      }
      break;
    }
    case TraceKind::Diurnal: {
      const int64_t day = p.period > 0 ? p.period : std::max<int64_t>(1, p.duration_k / 7);
      double day_scale = 1.0;
      for (int64_t t = 0; t < p.duration_k; ++t) {
        if (t % day == 0) {
          day_scale = rng.uniform(0.8, 1.0);
        }
        const double phase = static_cast<double>(t % day) / static_cast<double>(day);
        const double value =
            p.base_rate + p.amplitude * day_scale * daily_shape(phase) + p.noise * p.base_rate * rng.normal();
        trace.counts.push_back(clip_count(value, lo, hi));
      }
      break;
    }
    case TraceKind::RandomWalk: {
      const double step = std::max(p.amplitude, 1.0) / 20.0;
      double level = p.base_rate;
      for (int64_t t = 0; t < p.duration_k; ++t) {
        level += step * rng.normal();
        // Reflect at the bounds.
        if (level > hi) level = 2.0 * hi - level;
        if (level < lo) level = 2.0 * lo - level;
        level = std::clamp(level, lo, hi);
        trace.counts.push_back(clip_count(level, lo, hi));
      }
      break;
    }
  }
  return trace;
}

double SmoothedWorkload::min() const { return *std::min_element(values.begin(), values.end()); }
double SmoothedWorkload::max() const { return *std::max_element(values.begin(), values.end()); }

SmoothedWorkload smooth(const WorkloadTrace& trace, int64_t window_w) {
  const int64_t k = trace.duration_k();
  if (window_w < 1 || window_w % 2 == 0 || window_w > k) {
    throw ParameterError("smoothing window must be odd and within [1, duration_k]");
  }
  std::vector<double> prefix(static_cast<size_t>(k) + 1, 0.0);
  for (int64_t i = 0; i < k; ++i) {
    prefix[static_cast<size_t>(i) + 1] = prefix[static_cast<size_t>(i)] + static_cast<double>(trace.counts[static_cast<size_t>(i)]);
  }
  const int64_t half = window_w / 2;
  SmoothedWorkload sw{trace, window_w, {}};
  sw.values.reserve(static_cast<size_t>(k));
  for (int64_t i = 0; i < k; ++i) {
    const int64_t lo = std::max<int64_t>(0, i - half);
    const int64_t hi = std::min<int64_t>(k, i + half + 1);
    sw.values.push_back((prefix[static_cast<size_t>(hi)] - prefix[static_cast<size_t>(lo)]) / static_cast<double>(hi - lo));
  }
  return sw;
}

FailureMode parse_failure_mode(const std::string& name) {
  if (name == "rate" || name == "rate-equidistant") return FailureMode::RateEquidistant;
  if (name == "time" || name == "time-equidistant") return FailureMode::TimeEquidistant;
  throw ParameterError("unknown failure mode '" + name + "'");
}

std::string to_string(FailureMode mode) { return mode == FailureMode::RateEquidistant ? "rate" : "time"; }

int64_t argmin_time(const SmoothedWorkload& sw) {
  const auto it = std::min_element(sw.values.begin(), sw.values.end());
  return sw.source.start_time + (it - sw.values.begin());
}

int64_t argmax_time(const SmoothedWorkload& sw) {
  const auto it = std::max_element(sw.values.begin(), sw.values.end());
  return sw.source.start_time + (it - sw.values.begin());
}

namespace {

FailurePlan rate_equidistant(const SmoothedWorkload& sw, size_t m) {
  const double lo = sw.min();
  const double hi = sw.max();
  if (lo == hi && m > 2) {
    throw DegenerateError("workload is constant; cannot place more than 2 rate-equidistant failure points");
  }
  const size_t k = sw.values.size();
  if (m > k) {
    throw ParameterError("m exceeds the number of available timestamps");
  }

  std::set<size_t> taken;
  FailurePlan plan;
  // Order of candidates by distance to the target, then by time.
  std::vector<size_t> order(k);
  for (size_t i = 0; i < m; ++i) {
    const double target = (i + 1 == m) ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return std::abs(sw.values[a] - target) < std::abs(sw.values[b] - target);
    });
    const auto pick = std::find_if(order.begin(), order.end(), [&](size_t idx) { return !taken.contains(idx); });
    taken.insert(*pick);
    plan.points.push_back({sw.source.start_time + static_cast<int64_t>(*pick), sw.values[*pick]});
  }
  std::sort(plan.points.begin(), plan.points.end(),
            [](const FailurePoint& a, const FailurePoint& b) { return a.timestamp < b.timestamp; });
  return plan;
}

FailurePlan time_equidistant(const SmoothedWorkload& sw, size_t m) {
  const int64_t t_min = argmin_time(sw);
  const int64_t t_max = argmax_time(sw);
  // Step magnitude is floored, so no point overshoots t_max when argmax precedes argmin.
  const int64_t h = (t_max - t_min) / (static_cast<int64_t>(m) - 1);
  if (t_min == t_max || (m > 2 && h == 0)) {
    throw DegenerateError("argmin and argmax are too close for " + std::to_string(m) + " time-equidistant points");
  }
  FailurePlan plan;
  for (size_t i = 0; i + 1 < m; ++i) {
    const int64_t t = t_min + static_cast<int64_t>(i) * h;
    plan.points.push_back({t, sw.at(t)});
  }
  plan.points.push_back({t_max, sw.at(t_max)});
  std::sort(plan.points.begin(), plan.points.end(),
            [](const FailurePoint& a, const FailurePoint& b) { return a.timestamp < b.timestamp; });
  return plan;
}

}  // namespace

FailurePlan extract_failure_points(const SmoothedWorkload& sw, size_t m, FailureMode mode) {
  if (m < 2) {
    throw ParameterError("m must be >= 2");
  }
  return mode == FailureMode::RateEquidistant ? rate_equidistant(sw, m) : time_equidistant(sw, m);
}

}  // namespace khaos::workload
