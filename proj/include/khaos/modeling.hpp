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
#include <span>
#include <string>
#include <vector>

#include "khaos/anomaly.hpp"
#include "khaos/domain.hpp"

namespace khaos::modeling {

enum class Target { Latency, Recovery };

std::string to_string(Target target);
Target parse_target(const std::string& name);

/// One training or evaluation observation: value observed at (ci, tr).
struct Observation {
  double ci = 0.0;
  double tr = 0.0;
  double value = 0.0;
};

/// Polynomial least-squares model over (ci, tr).
///
/// Inputs are z-scored with the training means and deviations; coefficients
/// weigh the features {1, x, y, x^2, y^2, x*y} of the standardized inputs
/// (the first three for degree 1).
struct RegressionModel {
  Target target = Target::Latency;
  int degree = 2;
  std::vector<double> coefficients;
  std::array<double, 2> mean{};    // (ci, tr)
  std::array<double, 2> stddev{};  // (ci, tr)
  size_t sample_count = 0;
  double residual_rms = 0.0;

  /// Coefficients over the raw features {1, ci, tr, ci^2, tr^2, ci*tr}.
  [[nodiscard]] std::vector<double> raw_coefficients() const;

  bool operator==(const RegressionModel&) const = default;
};

/// Feature names in coefficient order for the given degree.
std::vector<std::string> feature_names(int degree);

/// Least-squares fit. Requires at least twice as many samples as features and
/// non-negative values; throws DegenerateError naming the collinear feature
/// when the design is rank-deficient.
RegressionModel fit(std::span<const Observation> samples, Target target, int degree = 2);

struct Prediction {
  double value = 0.0;
  bool clamped = false;  // raw polynomial was negative
};

Prediction predict_detailed(const RegressionModel& model, double ci, double tr);
inline double predict(const RegressionModel& model, double ci, double tr) {
  return predict_detailed(model, ci, tr).value;
}

struct PercentError {
  double value = 0.0;   // mean |pred - actual| / actual
  size_t used = 0;
  size_t excluded = 0;  // observations with a zero actual value
};

/// Mean relative error of the model over observations with actual > 0.
PercentError avg_percent_error(const RegressionModel& model, std::span<const Observation> observations);

/// Rescaling factor p: mean of observed/predicted latency ratios over the last
/// rescale_window_k optimization iterations (1 while empty).
class RescaleState {
 public:
  explicit RescaleState(size_t rescale_window_k = 5);

  double update(double observed_latency, double predicted_latency);
  [[nodiscard]] double p() const;
  [[nodiscard]] size_t rescale_window_k() const { return window_k_; }
  [[nodiscard]] const std::deque<std::pair<double, double>>& history() const { return history_; }

 private:
  size_t window_k_;
  std::deque<std::pair<double, double>> history_;
};

struct ForecastOptions {
  size_t ar_order = 5;
  size_t diff_order = 1;
  double learning_rate = 0.05;  // normalized LMS step

  bool operator==(const ForecastOptions&) const = default;
};

/// Single-channel online ARIMA over the incoming message rate, used to
/// decide whether the rate is about to drop.
class ForecastModel {
 public:
  explicit ForecastModel(ForecastOptions options = {});

  /// Seeds the model with a history of rates (scaled by their mean).
  void warm(std::span<const double> rates);
  void observe(double rate);
  /// Multi-step forecast; throws InsufficientDataError while cold.
  [[nodiscard]] std::vector<double> forecast(size_t horizon) const;
  [[nodiscard]] bool warm() const;
  [[nodiscard]] size_t observations() const { return model_.observations(); }
  [[nodiscard]] const anomaly::OnlineArima& model() const { return model_; }

 private:
  ForecastOptions options_;
  anomaly::OnlineArima model_;
  double scale_ = 0.0;
};

}  // namespace khaos::modeling
