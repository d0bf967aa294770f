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

#include "khaos/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace khaos::anomaly {

namespace {

constexpr double kNlmsRegularizer = 1e-4;

}  // namespace

OnlineArima::OnlineArima(ArimaOptions options) : options_(options), coefficients_(options.ar_order, 0.0) {
  if (options_.ar_order == 0) {
    throw ParameterError("ar_order must be >= 1");
  }
  if (!(options_.learning_rate >= 0.0)) {
    throw ParameterError("learning_rate must be >= 0");
  }
}

std::vector<double> OnlineArima::differenced_lags(const std::deque<double>& history) const {
  std::vector<double> series(history.begin(), history.end());
  for (size_t d = 0; d < options_.diff_order; ++d) {
    for (size_t i = series.size() - 1; i > 0; --i) {
      series[i] -= series[i - 1];
    }
    series.erase(series.begin());
  }
  // Newest first.
  std::vector<double> lags(options_.ar_order, 0.0);
  for (size_t i = 0; i < options_.ar_order && i < series.size(); ++i) {
    lags[i] = series[series.size() - 1 - i];
  }
  return lags;
}

double OnlineArima::predict_from(const std::deque<double>& history) const {
  const std::vector<double> lags = differenced_lags(history);
  double next = std::inner_product(coefficients_.begin(), coefficients_.end(), lags.begin(), 0.0);
  // Integrate back up through each differencing level using the last value at that level.
  std::vector<double> level(history.end() - static_cast<std::ptrdiff_t>(options_.diff_order + 1), history.end());
  std::vector<double> last_at_level;
  for (size_t d = 0; d < options_.diff_order; ++d) {
    last_at_level.push_back(level.back());
    for (size_t i = level.size() - 1; i > 0; --i) level[i] -= level[i - 1];
    level.erase(level.begin());
  }
  for (size_t d = options_.diff_order; d-- > 0;) {
    next += last_at_level[d];
  }
  return next;
}

double OnlineArima::predict() const {
  if (!ready()) {
    throw InsufficientDataError("online ARIMA needs more history before predicting");
  }
  return predict_from(history_);
}

std::optional<double> OnlineArima::update(double x, bool learn) {
  std::optional<double> prediction;
  if (ready()) {
    const std::vector<double> lags = differenced_lags(history_);
    prediction = predict_from(history_);
    const double error = x - *prediction;
    if (learn && options_.learning_rate > 0.0) {
      double step = options_.learning_rate;
      if (options_.normalized_step) {
        step /= kNlmsRegularizer + std::inner_product(lags.begin(), lags.end(), lags.begin(), 0.0);
      }
      for (size_t i = 0; i < coefficients_.size(); ++i) {
        coefficients_[i] += step * error * lags[i];
      }
    }
  }
  history_.push_back(x);
  while (history_.size() > options_.ar_order + options_.diff_order) {
    history_.pop_front();
  }
  ++observations_;
  return prediction;
}

std::vector<double> OnlineArima::forecast(size_t horizon) const {
  if (!ready()) {
    throw InsufficientDataError("online ARIMA needs more history before forecasting");
  }
  std::deque<double> history = history_;
  std::vector<double> out;
  out.reserve(horizon);
  for (size_t h = 0; h < horizon; ++h) {
    const double next = predict_from(history);
    out.push_back(next);
    history.push_back(next);
    history.pop_front();
  }
  return out;
}

Violations validate(const DetectorConfig& c) {
  Violations out;
  if (c.ar_order < 1) out.push_back({"ar_order", "ar_order >= 1"});
  if (c.error_window < c.ar_order) out.push_back({"error_window", "error_window >= ar_order"});
  if (!(c.threshold_multiplier > 0.0)) out.push_back({"threshold_multiplier", "threshold_multiplier > 0"});
  if (c.consecutive_normal_needed < 1) out.push_back({"consecutive_normal_needed", "consecutive_normal_needed >= 1"});
  if (!(c.learning_rate >= 0.0)) out.push_back({"learning_rate", "learning_rate >= 0"});
  if (!(c.error_floor >= 0.0)) out.push_back({"error_floor", "error_floor >= 0"});
  return out;
}

std::string to_string(Channel channel) { return channel == Channel::Throughput ? "throughput" : "lag"; }

namespace {

ArimaOptions arima_options(const DetectorConfig& c) { return {c.ar_order, c.diff_order, c.learning_rate, false}; }

}  // namespace

AnomalyDetector::AnomalyDetector(DetectorConfig config)
    : config_(config), models_{OnlineArima(arima_options(config)), OnlineArima(arima_options(config))} {
  if (auto v = validate(config_); !v.empty()) {
    throw ParameterError("invalid detector config: " + describe(v));
  }
}

std::array<double, kChannels> AnomalyDetector::normalize(const MetricsSample& s) const {
  return {s.input_throughput / scale_, s.consumer_lag / scale_};
}

void AnomalyDetector::push_error(size_t channel, double error) {
  auto& window = errors_[channel];
  window.push_back(error);
  if (window.size() > config_.error_window) window.pop_front();
}

double AnomalyDetector::threshold(Channel channel) const {
  const auto& window = errors_[static_cast<size_t>(channel)];
  if (window.empty()) return config_.error_floor;
  const double n = static_cast<double>(window.size());
  const double mean = std::accumulate(window.begin(), window.end(), 0.0) / n;
  double var = 0.0;
  for (double e : window) var += (e - mean) * (e - mean);
  const double stddev = std::sqrt(var / n);
  return std::max(mean + config_.threshold_multiplier * stddev, config_.error_floor);
}

void AnomalyDetector::warmup(std::span<const MetricsSample> normal_metrics) {
  if (normal_metrics.size() < 10 * config_.ar_order) {
    throw InsufficientDataError("detector warmup needs at least " + std::to_string(10 * config_.ar_order) +
                                " samples, got " + std::to_string(normal_metrics.size()));
  }
  // Both channels are scaled by the mean input rate: lag becomes "seconds of input".
  double mean = 0.0;
  for (const auto& s : normal_metrics) mean += s.input_throughput;
  mean /= static_cast<double>(normal_metrics.size());
  scale_ = mean > 0.0 ? mean : 1.0;

  for (const auto& s : normal_metrics) {
    const auto values = normalize(s);
    for (size_t c = 0; c < kChannels; ++c) {
      if (auto prediction = models_[c].update(values[c])) {
        push_error(c, std::abs(values[c] - *prediction));
      }
    }
  }
  anomaly_start_.reset();
  normal_run_ = 0;
  warmed_ = true;
}

Observation AnomalyDetector::observe(const MetricsSample& sample) {
  Observation obs;
  const auto values = normalize(sample);
  std::array<bool, kChannels> over{};
  for (size_t c = 0; c < kChannels; ++c) {
    if (models_[c].ready()) {
      obs.prediction[c] = models_[c].predict();
      obs.error[c] = std::abs(values[c] - obs.prediction[c]);
      over[c] = obs.error[c] > threshold(static_cast<Channel>(c));
    } else {
      obs.prediction[c] = values[c];
    }
  }
  const bool sample_anomalous = over[0] || over[1];

  if (!anomaly_start_) {
    if (sample_anomalous) {
      anomaly_start_ = sample.t;
      trigger_ = over[static_cast<size_t>(Channel::Lag)] ? Channel::Lag : Channel::Throughput;
      normal_run_ = 0;
    } else {
      for (size_t c = 0; c < kChannels; ++c) push_error(c, obs.error[c]);
    }
  } else if (sample_anomalous) {
    normal_run_ = 0;
  } else {
    if (normal_run_ == 0) normal_run_start_ = sample.t;
    if (++normal_run_ >= config_.consecutive_normal_needed) {
      intervals_.push_back({*anomaly_start_, normal_run_start_, trigger_});
      anomaly_start_.reset();
      normal_run_ = 0;
    }
  }

  // Anomalous samples never enter the predictor history, so predictions keep
  // tracking pre-anomaly behavior until the metrics return to it.
  if (!sample_anomalous) {
    const bool learn = !anomaly_start_;
    for (size_t c = 0; c < kChannels; ++c) models_[c].update(values[c], learn);
  }
  obs.anomalous = anomaly_start_.has_value();
  return obs;
}

std::vector<AnomalyInterval> detect(const DetectorConfig& config, std::span<const MetricsSample> metrics,
                                    size_t warmup_len) {
  AnomalyDetector detector(config);
  warmup_len = std::min(warmup_len, metrics.size());
  detector.warmup(metrics.first(warmup_len));
  for (const auto& s : metrics.subspan(warmup_len)) detector.observe(s);
  auto out = detector.intervals();
  if (auto since = detector.anomalous_since(); since && !metrics.empty()) {
    out.push_back({*since, metrics.back().t, Channel::Lag});
  }
  return out;
}

double measure_recovery(const DetectorConfig& config, std::span<const MetricsSample> metrics, double failure_time,
                        double grace, size_t warmup_len) {
  const auto first_after = std::find_if(metrics.begin(), metrics.end(),
                                        [failure_time](const MetricsSample& s) { return s.t > failure_time; });
  const auto split = static_cast<size_t>(first_after - metrics.begin());
  const size_t warm_from = split > warmup_len ? split - warmup_len : 0;

  AnomalyDetector detector(config);
  detector.warmup(metrics.subspan(warm_from, split - warm_from));

  for (const auto& s : metrics.subspan(split)) {
    detector.observe(s);
    if (!detector.intervals().empty()) break;
    if (!detector.anomalous() && s.t > failure_time + grace) break;
  }
  for (const auto& interval : detector.intervals()) {
    if (interval.start > failure_time && interval.start <= failure_time + grace) {
      return interval.end - failure_time;
    }
  }
  if (auto since = detector.anomalous_since(); since && *since <= failure_time + grace) {
    throw DetectionMissError("anomaly starting at " + std::to_string(*since) + " never ended");
  }
  throw DetectionMissError("no anomaly detected within " + std::to_string(grace) + " s after the failure at " +
                           std::to_string(failure_time));
}

}  // namespace khaos::anomaly
