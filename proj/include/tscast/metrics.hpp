#pragma once

// Forecast evaluation: RMSE, directional accuracy, the repeat-last-value
// baseline, and per-series reports over a dataset's test rows.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "tscast/dataprep.hpp"
#include "tscast/errors.hpp"
#include "tscast/matrix.hpp"
#include "tscast/training.hpp"

namespace tscast {

inline double rmse(const Matrix& actual, const Matrix& predicted) {
  return std::sqrt(mse(actual, predicted));
}

/// Fraction of steps whose actual and predicted moves have the same sign,
/// flat-vs-flat counting as agreement (the product test uses >= 0). The
/// anchors act as the value preceding each sequence, so the first step is
/// judged relative to the last known value.
inline double directional_accuracy(std::span<const double> actual,
                                   std::span<const double> predicted, double anchor_actual,
                                   double anchor_predicted) {
  if (actual.size() != predicted.size()) {
    throw ShapeError("directional_accuracy: lengths differ, " + std::to_string(actual.size()) +
                     " vs " + std::to_string(predicted.size()));
  }
  if (actual.empty()) throw ShapeError("directional_accuracy: empty sequences");
  double prev_a = anchor_actual;
  double prev_p = anchor_predicted;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < actual.size(); ++t) {
    const double move_a = actual[t] - prev_a;
    const double move_p = predicted[t] - prev_p;
    if (move_a * move_p >= 0.0) ++hits;
    prev_a = actual[t];
    prev_p = predicted[t];
  }
  return static_cast<double>(hits) / static_cast<double>(actual.size());
}

/// Zero-order hold: every forecast step repeats the window's last value.
inline std::vector<double> baseline_forecast(std::span<const double> window, std::size_t f) {
  if (window.empty()) throw ShapeError("baseline_forecast: empty window");
  return std::vector<double>(f, window.back());
}

enum class ModelKind { Lstm, Gru, Baseline };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Lstm: return "lstm";
    case ModelKind::Gru: return "gru";
    default: return "baseline";
  }
}

/// Per-series evaluation result. rmse is on normalized values; rmse_denorm
/// undoes the series' min-max scaling.
struct ForecastReport {
  std::string series;
  ModelKind model = ModelKind::Baseline;
  std::size_t horizon = 1;
  double rmse = 0.0;
  double da = 0.0;
  double rmse_denorm = 0.0;
};

namespace detail {

inline void require_test_rows(const WindowedDataset& data) {
  if (data.test_rows() < 1) {
    throw ConfigError("evaluate: dataset '" + data.source + "' has no test rows");
  }
}

// Predictions for rows [n_train, rows), one forecast row per test row.
inline Matrix predict_rows(const TrainedModel& model, const WindowedDataset& data) {
  if (model.horizon() != data.horizon) {
    throw ConfigError("evaluate: model horizon " + std::to_string(model.horizon()) +
                      " does not match dataset horizon " + std::to_string(data.horizon));
  }
  if (model.trained_window != 0 && model.trained_window != data.window) {
    throw ConfigError("evaluate: model trained with window " +
                      std::to_string(model.trained_window) + ", dataset uses " +
                      std::to_string(data.window));
  }
  const std::size_t n_test = data.test_rows();
  Matrix preds(n_test, data.horizon);
  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < n_test; begin += kChunk) {
    const std::size_t end = std::min(begin + kChunk, n_test);
    idx.resize(end - begin);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = data.n_train + begin + i;
    const Matrix windows = gather_rows(data.x, idx);
    const Matrix chunk = forward_batch(model.cell, model.dense, windows);
    for (std::size_t r = 0; r < chunk.rows(); ++r)
      for (std::size_t c = 0; c < chunk.cols(); ++c) preds(begin + r, c) = chunk(r, c);
  }
  return preds;
}

inline Matrix baseline_rows(const WindowedDataset& data) {
  const std::size_t n_test = data.test_rows();
  Matrix preds(n_test, data.horizon);
  for (std::size_t r = 0; r < n_test; ++r) {
    const double last = data.x(data.n_train + r, data.window - 1);
    for (std::size_t c = 0; c < data.horizon; ++c) preds(r, c) = last;
  }
  return preds;
}

inline Matrix test_targets(const WindowedDataset& data) {
  Matrix targets(data.test_rows(), data.horizon);
  for (std::size_t r = 0; r < data.test_rows(); ++r)
    for (std::size_t c = 0; c < data.horizon; ++c) targets(r, c) = data.y(data.n_train + r, c);
  return targets;
}

// Directional accuracy over the test block. For one-step forecasts the test
// rows form one sequential horizon: consecutive predictions are compared
// against consecutive actuals, anchored at the last observed sample before
// the first test target. For multi-step forecasts each row's trajectory is
// scored on its own, anchored at that row's last input, and rows are
// averaged.
inline double test_da(const WindowedDataset& data, const Matrix& preds) {
  const std::size_t n_test = data.test_rows();
  if (data.horizon == 1) {
    std::vector<double> actual(n_test), predicted(n_test);
    for (std::size_t r = 0; r < n_test; ++r) {
      actual[r] = data.y(data.n_train + r, 0);
      predicted[r] = preds(r, 0);
    }
    const double anchor = data.x(data.n_train, data.window - 1);
    return directional_accuracy(actual, predicted, anchor, anchor);
  }
  double sum = 0.0;
  std::vector<double> actual(data.horizon), predicted(data.horizon);
  for (std::size_t r = 0; r < n_test; ++r) {
    for (std::size_t c = 0; c < data.horizon; ++c) {
      actual[c] = data.y(data.n_train + r, c);
      predicted[c] = preds(r, c);
    }
    const double anchor = data.x(data.n_train + r, data.window - 1);
    sum += directional_accuracy(actual, predicted, anchor, anchor);
  }
  return sum / static_cast<double>(n_test);
}

inline ForecastReport report_from_predictions(const WindowedDataset& data, const Matrix& preds,
                                              ModelKind kind) {
  ForecastReport rep;
  rep.series = data.source;
  rep.model = kind;
  rep.horizon = data.horizon;
  rep.rmse = rmse(test_targets(data), preds);
  rep.da = test_da(data, preds);
  rep.rmse_denorm = rep.rmse * data.norm.range();
  return rep;
}

}  // namespace detail

/// Evaluates a trained model on the dataset's test rows.
inline ForecastReport evaluate_model(const TrainedModel& model, const WindowedDataset& data) {
  detail::require_test_rows(data);
  const Matrix preds = detail::predict_rows(model, data);
  return detail::report_from_predictions(
      data, preds, model.kind == CellKind::Lstm ? ModelKind::Lstm : ModelKind::Gru);
}

/// Evaluates the repeat-last-value baseline on the dataset's test rows.
inline ForecastReport evaluate_baseline(const WindowedDataset& data) {
  detail::require_test_rows(data);
  return detail::report_from_predictions(data, detail::baseline_rows(data), ModelKind::Baseline);
}

}  // namespace tscast
