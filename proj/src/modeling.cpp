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

#include "khaos/modeling.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace khaos::modeling {

std::string to_string(Target target) { return target == Target::Latency ? "latency" : "recovery"; }

Target parse_target(const std::string& name) {
  if (name == "latency") return Target::Latency;
  if (name == "recovery") return Target::Recovery;
  throw ParameterError("unknown model target '" + name + "'");
}

std::vector<std::string> feature_names(int degree) {
  if (degree == 1) return {"1", "ci", "tr"};
  return {"1", "ci", "tr", "ci^2", "tr^2", "ci*tr"};
}

namespace {

size_t feature_count(int degree) { return degree == 1 ? 3 : 6; }

void features(int degree, double x, double y, double* out) {
  out[0] = 1.0;
  out[1] = x;
  out[2] = y;
  if (degree == 2) {
    out[3] = x * x;
    out[4] = y * y;
    out[5] = x * y;
  }
}

}  // namespace

std::vector<double> RegressionModel::raw_coefficients() const {
  // x = alpha * ci + beta, y = gamma * tr + delta.
  const double alpha = 1.0 / stddev[0];
  const double beta = -mean[0] / stddev[0];
  const double gamma = 1.0 / stddev[1];
  const double delta = -mean[1] / stddev[1];
  const auto& a = coefficients;
  std::vector<double> raw(6, 0.0);
  raw[0] = a[0] + a[1] * beta + a[2] * delta;
  raw[1] = a[1] * alpha;
  raw[2] = a[2] * gamma;
  if (degree == 2) {
    raw[0] += a[3] * beta * beta + a[4] * delta * delta + a[5] * beta * delta;
    raw[1] += 2.0 * a[3] * alpha * beta + a[5] * alpha * delta;
    raw[2] += 2.0 * a[4] * gamma * delta + a[5] * beta * gamma;
    raw[3] = a[3] * alpha * alpha;
    raw[4] = a[4] * gamma * gamma;
    raw[5] = a[5] * alpha * gamma;
  }
  return raw;
}

RegressionModel fit(std::span<const Observation> samples, Target target, int degree) {
  if (degree != 1 && degree != 2) {
    throw ParameterError("degree must be 1 or 2");
  }
  const size_t p = feature_count(degree);
  if (samples.size() < 2 * p) {
    throw InsufficientDataError("fit needs at least " + std::to_string(2 * p) + " samples, got " +
                                std::to_string(samples.size()));
  }
  for (const auto& s : samples) {
    if (!std::isfinite(s.ci) || !std::isfinite(s.tr) || !std::isfinite(s.value) || s.value < 0.0) {
      throw ParameterError("training samples must be finite with value >= 0");
    }
  }

  RegressionModel model;
  model.target = target;
  model.degree = degree;
  model.sample_count = samples.size();
  const double n = static_cast<double>(samples.size());
  for (size_t c = 0; c < 2; ++c) {
    double sum = 0.0;
    for (const auto& s : samples) sum += c == 0 ? s.ci : s.tr;
    model.mean[c] = sum / n;
    double var = 0.0;
    for (const auto& s : samples) {
      const double d = (c == 0 ? s.ci : s.tr) - model.mean[c];
      var += d * d;
    }
    model.stddev[c] = std::sqrt(var / n);
  }
  const double span_ci = std::max(1.0, std::abs(model.mean[0]));
  const double span_tr = std::max(1.0, std::abs(model.mean[1]));
  if (model.stddev[0] <= 1e-12 * span_ci) {
    throw DegenerateError("degenerate fit: feature 'ci' is constant across the training samples");
  }
  if (model.stddev[1] <= 1e-12 * span_tr) {
    throw DegenerateError("degenerate fit: feature 'tr' is constant across the training samples");
  }

  Eigen::MatrixXd design(samples.size(), p);
  Eigen::VectorXd rhs(samples.size());
  for (size_t r = 0; r < samples.size(); ++r) {
    double row[6];
    features(degree, (samples[r].ci - model.mean[0]) / model.stddev[0],
             (samples[r].tr - model.mean[1]) / model.stddev[1], row);
    for (size_t c = 0; c < p; ++c) design(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    rhs(static_cast<Eigen::Index>(r)) = samples[r].value;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(p)) {
    const auto names = feature_names(degree);
    const auto collinear = qr.colsPermutation().indices()(qr.rank());
    throw DegenerateError("degenerate fit: feature '" + names[static_cast<size_t>(collinear)] +
                          "' is collinear with the others");
  }
  const Eigen::VectorXd w = qr.solve(rhs);
  model.coefficients.assign(w.data(), w.data() + w.size());
  model.residual_rms = std::sqrt((design * w - rhs).squaredNorm() / n);
  return model;
}

Prediction predict_detailed(const RegressionModel& model, double ci, double tr) {
  double row[6];
  features(model.degree, (ci - model.mean[0]) / model.stddev[0], (tr - model.mean[1]) / model.stddev[1], row);
  double value = 0.0;
  for (size_t c = 0; c < model.coefficients.size(); ++c) value += model.coefficients[c] * row[c];
  if (value < 0.0) return {0.0, true};
  return {value, false};
}

PercentError avg_percent_error(const RegressionModel& model, std::span<const Observation> observations) {
  if (observations.empty()) {
    throw ParameterError("avg_percent_error needs at least one observation");
  }
  PercentError out;
  double sum = 0.0;
  for (const auto& o : observations) {
    if (o.value == 0.0) {
      ++out.excluded;
      continue;
    }
    sum += std::abs(predict(model, o.ci, o.tr) - o.value) / o.value;
    ++out.used;
  }
  out.value = out.used > 0 ? sum / static_cast<double>(out.used) : 0.0;
  return out;
}

RescaleState::RescaleState(size_t rescale_window_k) : window_k_(rescale_window_k) {
  if (window_k_ == 0) {
    throw ParameterError("rescale_window_k must be >= 1");
  }
}

double RescaleState::update(double observed_latency, double predicted_latency) {
  if (!(predicted_latency > 0.0)) {
    throw ParameterError("predicted latency must be > 0 to update the rescaling factor");
  }
  history_.emplace_back(observed_latency, predicted_latency);
  while (history_.size() > window_k_) history_.pop_front();
  return p();
}

double RescaleState::p() const {
  if (history_.empty()) return 1.0;
  double sum = 0.0;
  for (const auto& [observed, predicted] : history_) sum += observed / predicted;
  return sum / static_cast<double>(history_.size());
}

ForecastModel::ForecastModel(ForecastOptions options)
    : options_(options), model_({options.ar_order, options.diff_order, options.learning_rate, true}) {}

void ForecastModel::warm(std::span<const double> rates) {
  if (rates.empty()) return;
  if (scale_ == 0.0) {
    const double mean = std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(rates.size());
    scale_ = mean > 0.0 ? mean : 1.0;
  }
  for (double r : rates) model_.update(r / scale_);
}

void ForecastModel::observe(double rate) {
  if (scale_ == 0.0) scale_ = rate > 0.0 ? rate : 1.0;
  model_.update(rate / scale_);
}

bool ForecastModel::warm() const { return model_.observations() >= 10 * options_.ar_order && model_.ready(); }

std::vector<double> ForecastModel::forecast(size_t horizon) const {
  if (!warm()) {
    throw InsufficientDataError("forecast model needs at least " + std::to_string(10 * options_.ar_order) +
                                " observations");
  }
  std::vector<double> out = model_.forecast(horizon);
  for (double& v : out) v = std::max(0.0, v * scale_);
  return out;
}

}  // namespace khaos::modeling
