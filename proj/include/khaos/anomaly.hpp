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

#include <array>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "khaos/domain.hpp"

namespace khaos::anomaly {

/// No anomalous interval could be attributed to a failure.
class DetectionMissError : public Error {
 public:
  using Error::Error;
};

struct ArimaOptions {
  size_t ar_order = 5;
  size_t diff_order = 1;
  double learning_rate = 1e-6;
  // Normalized LMS step (learning_rate / (1e-4 + |z|^2)) instead of a plain gradient step.
  bool normalized_step = false;

  bool operator==(const ArimaOptions&) const = default;
};

/// Online ARIMA(p, d, 0) on a single series: an AR model over the d-times
/// differenced values, trained by stochastic gradient descent on the
/// one-step-ahead squared error. With zero coefficients and d = 1 the
/// prediction is the last observed value.
class OnlineArima {
 public:
  explicit OnlineArima(ArimaOptions options = {});

  /// True once enough history exists to form a prediction.
  [[nodiscard]] bool ready() const { return history_.size() >= options_.ar_order + options_.diff_order; }
  /// Prediction for the next value. Requires ready().
  [[nodiscard]] double predict() const;
  /// Appends x; when learn is set and a prediction existed, takes one gradient step.
  /// Returns the prediction made before seeing x, if any.
  std::optional<double> update(double x, bool learn = true);
  /// Iterated one-step forecast feeding predictions back as inputs.
  [[nodiscard]] std::vector<double> forecast(size_t horizon) const;

  [[nodiscard]] const std::vector<double>& coefficients() const { return coefficients_; }
  [[nodiscard]] const ArimaOptions& options() const { return options_; }
  [[nodiscard]] size_t observations() const { return observations_; }

 private:
  [[nodiscard]] std::vector<double> differenced_lags(const std::deque<double>& history) const;
  [[nodiscard]] double predict_from(const std::deque<double>& history) const;

  ArimaOptions options_;
  std::vector<double> coefficients_;
  std::deque<double> history_;
  size_t observations_ = 0;
};

struct DetectorConfig {
  size_t ar_order = 5;
  size_t diff_order = 1;
  double threshold_multiplier = 4.0;
  size_t error_window = 120;
  size_t consecutive_normal_needed = 30;
  double learning_rate = 1e-6;
  // Minimum threshold on the normalized error (one second of mean input), so
  // near-constant error windows and checkpoint stalls are not flagged.
  double error_floor = 1.0;

  bool operator==(const DetectorConfig&) const = default;
};

Violations validate(const DetectorConfig& config);

enum class Channel { Throughput = 0, Lag = 1 };
inline constexpr size_t kChannels = 2;

std::string to_string(Channel channel);

struct AnomalyInterval {
  double start = 0.0;
  double end = 0.0;
  Channel channel = Channel::Lag;

  bool operator==(const AnomalyInterval&) const = default;
};

struct Observation {
  std::array<double, kChannels> prediction{};
  std::array<double, kChannels> error{};  // absolute, normalized
  bool anomalous = false;                 // status after this sample
};

/// Online anomaly detector over the throughput and consumer-lag channels.
/// Anomalous when either channel's error exceeds
/// max(mean + k * stddev of its error window, error_floor). Both channels are
/// scaled by the warmup mean input rate. Error windows and coefficients are
/// frozen while anomalous, and anomalous samples are kept out of the predictor
/// history.
class AnomalyDetector {
 public:
  explicit AnomalyDetector(DetectorConfig config = {});

  /// Trains on failure-free metrics. Throws InsufficientDataError when the
  /// series is shorter than 10 * ar_order.
  void warmup(std::span<const MetricsSample> normal_metrics);
  Observation observe(const MetricsSample& sample);

  [[nodiscard]] bool warmed_up() const { return warmed_; }
  [[nodiscard]] bool anomalous() const { return anomaly_start_.has_value(); }
  [[nodiscard]] std::optional<double> anomalous_since() const { return anomaly_start_; }
  /// Closed anomalous intervals so far.
  [[nodiscard]] const std::vector<AnomalyInterval>& intervals() const { return intervals_; }
  [[nodiscard]] const DetectorConfig& config() const { return config_; }
  [[nodiscard]] const std::array<OnlineArima, kChannels>& models() const { return models_; }
  [[nodiscard]] double scale() const { return scale_; }
  [[nodiscard]] double threshold(Channel channel) const;

 private:
  [[nodiscard]] std::array<double, kChannels> normalize(const MetricsSample& s) const;
  void push_error(size_t channel, double error);

  DetectorConfig config_;
  std::array<OnlineArima, kChannels> models_;
  std::array<std::deque<double>, kChannels> errors_;
  double scale_ = 1.0;
  bool warmed_ = false;

  std::optional<double> anomaly_start_;
  Channel trigger_ = Channel::Lag;
  size_t normal_run_ = 0;
  double normal_run_start_ = 0.0;
  std::vector<AnomalyInterval> intervals_;
};

/// Streams every sample through a detector warmed on the first warmup_len samples
/// and returns all closed intervals (an interval still open at the end is closed
/// at the last sample).
std::vector<AnomalyInterval> detect(const DetectorConfig& config, std::span<const MetricsSample> metrics,
                                    size_t warmup_len);

inline constexpr size_t kDefaultRecoveryWarmup = 240;

/// Recovery time measured as the length of the first anomalous interval starting
/// in (failure_time, failure_time + grace]. The detector is warmed on up to
/// warmup_len samples at or before failure_time; the start is clamped to
/// failure_time. Throws DetectionMissError when nothing is found or the
/// interval never closes.
double measure_recovery(const DetectorConfig& config, std::span<const MetricsSample> metrics, double failure_time,
                        double grace, size_t warmup_len = kDefaultRecoveryWarmup);

}  // namespace khaos::anomaly
