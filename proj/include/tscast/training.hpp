#pragma once

// Training: MSE loss, hand-derived backpropagation through time for both
// cells, Adam, and the epoch loop.
//
// Only the final activation h_w feeds the dense head, so the backward pass
// seeds dL/dh at the last step and walks the window backwards. For the
// LSTM the cell-state gradient accumulates three ways at each step: the
// direct h = o . tanh(c) path, the output-gate peephole (which reads the
// current cell), and the forget/input peepholes of the following step
// (which read this cell as their previous one).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tscast/cells.hpp"
#include "tscast/dataprep.hpp"
#include "tscast/errors.hpp"
#include "tscast/matrix.hpp"
#include "tscast/rng.hpp"

namespace tscast {

/// Mean of squared differences over all elements.
inline double mse(const Matrix& actual, const Matrix& predicted) {
  require_same_shape(actual, predicted, "mse");
  if (actual.size() == 0) throw ShapeError("mse: empty matrices");
  auto a = actual.data();
  auto p = predicted.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - p[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 0.001;
  std::uint64_t seed = 42;
  std::size_t units = 128;
  std::optional<double> gradient_clip;  // global L2 norm; disabled by default
  bool peepholes = true;
  bool output_peephole_prev_cell = false;

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
    if (units < 1) throw ConfigError("train: units must be >= 1");
  }
};

struct TrainedModel {
  CellKind kind = CellKind::Lstm;
  CellParams cell;
  DenseParams dense;
  TrainConfig config;
  std::size_t trained_window = 0;
  double final_loss = 0.0;

  std::size_t units() const { return dense.units(); }
  std::size_t horizon() const { return dense.steps(); }
};

// ---------------------------------------------------------------------------
// Gradients. Gradient storage reuses the parameter structs, entry for entry.
// ---------------------------------------------------------------------------

inline LstmParams zeros_like(const LstmParams& p) {
  LstmParams g;
  g.w_i = Matrix(p.w_i.rows(), p.w_i.cols());
  g.w_f = Matrix(p.w_f.rows(), p.w_f.cols());
  g.w_o = Matrix(p.w_o.rows(), p.w_o.cols());
  g.w_c = Matrix(p.w_c.rows(), p.w_c.cols());
  g.u_i = Matrix(p.u_i.rows(), p.u_i.cols());
  g.u_f = Matrix(p.u_f.rows(), p.u_f.cols());
  g.u_o = Matrix(p.u_o.rows(), p.u_o.cols());
  g.u_c = Matrix(p.u_c.rows(), p.u_c.cols());
  g.v_i.assign(p.v_i.size(), 0.0);
  g.v_f.assign(p.v_f.size(), 0.0);
  g.v_o.assign(p.v_o.size(), 0.0);
  g.peepholes = p.peepholes;
  g.output_peephole_prev_cell = p.output_peephole_prev_cell;
  return g;
}

inline GruParams zeros_like(const GruParams& p) {
  GruParams g;
  g.w_z = Matrix(p.w_z.rows(), p.w_z.cols());
  g.w_r = Matrix(p.w_r.rows(), p.w_r.cols());
  g.w_h = Matrix(p.w_h.rows(), p.w_h.cols());
  g.u_z = Matrix(p.u_z.rows(), p.u_z.cols());
  g.u_r = Matrix(p.u_r.rows(), p.u_r.cols());
  g.u_h = Matrix(p.u_h.rows(), p.u_h.cols());
  return g;
}

inline DenseParams zeros_like(const DenseParams& p) {
  DenseParams g;
  g.w = Matrix(p.w.rows(), p.w.cols());
  g.b.assign(p.b.size(), 0.0);
  return g;
}

namespace detail {

// dv[j] += sum_b delta(j, b) * cell(j, b): gradient of a diagonal peephole.
inline void peephole_grad(std::vector<double>& dv, const Matrix& delta, const Matrix& cell) {
  for (std::size_t r = 0; r < delta.rows(); ++r)
    for (std::size_t c = 0; c < delta.cols(); ++c) dv[r] += delta(r, c) * cell(r, c);
}

// delta(j, b) * v[j], column-wise diagonal product.
inline Matrix peephole_backprop(std::span<const double> v, const Matrix& delta) {
  Matrix out = delta;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= v[r];
  return out;
}

inline std::vector<double> row_sums(const Matrix& m) {
  std::vector<double> s(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) s[r] += m(r, c);
  return s;
}

inline void check_batch_shapes(std::size_t dense_steps, const Matrix& windows,
                               const Matrix& targets) {
  if (windows.rows() != targets.rows()) {
    throw ShapeError("bptt: window batch " + windows.shape() + " and target batch " +
                     targets.shape() + " row counts differ");
  }
  if (windows.rows() == 0) throw ShapeError("bptt: empty batch");
  if (targets.cols() != dense_steps) {
    throw ShapeError("bptt: target batch " + targets.shape() + " does not match dense head with " +
                     std::to_string(dense_steps) + " steps");
  }
}

// Seeds the backward pass: dL/dprediction for L = mean squared error over
// all batch elements and steps, plus the dense-head gradients.
struct HeadBackward {
  Matrix d_act;  // dL/dh_w, units x B
  DenseParams dense_grad;
  double loss = 0.0;
};

inline HeadBackward head_backward(const DenseParams& dense, const Matrix& h_last,
                                  const Matrix& targets) {
  const std::size_t batch = targets.rows();
  const std::size_t steps = dense.steps();
  Matrix pred = matmul(dense.w, h_last);  // steps x B
  add_bias_rows(pred, dense.b);

  HeadBackward out;
  Matrix d_pred(steps, batch);
  const double norm = 2.0 / static_cast<double>(batch * steps);
  double sq = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t b = 0; b < batch; ++b) {
      const double diff = pred(s, b) - targets(b, s);
      sq += diff * diff;
      d_pred(s, b) = norm * diff;
    }
  }
  out.loss = sq / static_cast<double>(batch * steps);
  out.dense_grad.w = matmul(d_pred, transpose(h_last));
  out.dense_grad.b = row_sums(d_pred);
  out.d_act = matmul(transpose(dense.w), d_pred);
  return out;
}

inline Matrix sigmoid_backward(const Matrix& gate, const Matrix& upstream) {
  Matrix out = upstream;
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    const double g = gate.data()[i];
    out.data()[i] *= g * (1.0 - g);
  }
  return out;
}

inline Matrix tanh_backward_from_output(const Matrix& tanh_out, const Matrix& upstream) {
  Matrix out = upstream;
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    const double t = tanh_out.data()[i];
    out.data()[i] *= 1.0 - t * t;
  }
  return out;
}

}  // namespace detail

struct LstmGradients {
  LstmParams cell;
  DenseParams dense;
  double loss = 0.0;
};

struct GruGradients {
  GruParams cell;
  DenseParams dense;
  double loss = 0.0;
};

/// Exact gradient of the batch MSE with respect to every LSTM parameter,
/// averaged over the batch. window_batch is rows x w, target_batch rows x f.
inline LstmGradients bptt_gradients(const LstmParams& p, const DenseParams& dense,
                                    const Matrix& window_batch, const Matrix& target_batch) {
  detail::check_batch_shapes(dense.steps(), window_batch, target_batch);
  LstmBatchTrace trace;
  lstm_forward_batch(p, dense, window_batch, &trace);

  const std::size_t w = window_batch.cols();
  const std::size_t batch = window_batch.rows();
  const std::size_t units = p.units();

  LstmGradients out;
  out.cell = zeros_like(p);
  auto head = detail::head_backward(dense, trace.act.back(), target_batch);
  out.dense = std::move(head.dense_grad);
  out.loss = head.loss;

  const Matrix zero_state(units, batch);
  Matrix d_act = std::move(head.d_act);   // dL/dh_t
  Matrix d_cell_future(units, batch);     // cell-gradient arriving from step t+1

  for (std::size_t step = w; step-- > 0;) {
    const Matrix& x_t = trace.x[step];
    const Matrix& gate_i = trace.gate_i[step];
    const Matrix& gate_f = trace.gate_f[step];
    const Matrix& gate_o = trace.gate_o[step];
    const Matrix& cand = trace.cand[step];
    const Matrix& c_t = trace.cell[step];
    const Matrix& h_prev = step > 0 ? trace.act[step - 1] : zero_state;
    const Matrix& c_prev = step > 0 ? trace.cell[step - 1] : zero_state;

    const Matrix tanh_c = tanh(c_t);

    // Output gate: h = o . tanh(c).
    const Matrix d_pre_o = detail::sigmoid_backward(gate_o, hadamard(d_act, tanh_c));

    // Cell gradient: direct path through tanh, inflow from t+1, and the
    // output-gate peephole when it reads the current cell.
    Matrix d_cell = d_cell_future + detail::tanh_backward_from_output(tanh_c, hadamard(d_act, gate_o));
    if (p.peepholes && !p.output_peephole_prev_cell) {
      d_cell += detail::peephole_backprop(p.v_o, d_pre_o);
    }

    const Matrix d_pre_f = detail::sigmoid_backward(gate_f, hadamard(d_cell, c_prev));
    const Matrix d_pre_i = detail::sigmoid_backward(gate_i, hadamard(d_cell, cand));
    const Matrix d_pre_c = detail::tanh_backward_from_output(cand, hadamard(d_cell, gate_i));

    const Matrix x_T = transpose(x_t);
    const Matrix h_prev_T = transpose(h_prev);
    out.cell.w_o += matmul(d_pre_o, x_T);
    out.cell.u_o += matmul(d_pre_o, h_prev_T);
    out.cell.w_f += matmul(d_pre_f, x_T);
    out.cell.u_f += matmul(d_pre_f, h_prev_T);
    out.cell.w_i += matmul(d_pre_i, x_T);
    out.cell.u_i += matmul(d_pre_i, h_prev_T);
    out.cell.w_c += matmul(d_pre_c, x_T);
    out.cell.u_c += matmul(d_pre_c, h_prev_T);
    if (p.peepholes) {
      detail::peephole_grad(out.cell.v_o, d_pre_o,
                            p.output_peephole_prev_cell ? c_prev : c_t);
      detail::peephole_grad(out.cell.v_f, d_pre_f, c_prev);
      detail::peephole_grad(out.cell.v_i, d_pre_i, c_prev);
    }

    // Cell gradient handed to step t-1: the forget path plus the peepholes
    // that read c_{t-1}.
    d_cell_future = hadamard(d_cell, gate_f);
    if (p.peepholes) {
      d_cell_future += detail::peephole_backprop(p.v_f, d_pre_f);
      d_cell_future += detail::peephole_backprop(p.v_i, d_pre_i);
      if (p.output_peephole_prev_cell) {
        d_cell_future += detail::peephole_backprop(p.v_o, d_pre_o);
      }
    }

    d_act = matmul(transpose(p.u_o), d_pre_o);
    d_act += matmul(transpose(p.u_f), d_pre_f);
    d_act += matmul(transpose(p.u_i), d_pre_i);
    d_act += matmul(transpose(p.u_c), d_pre_c);
  }
  return out;
}

/// Same for the GRU.
inline GruGradients bptt_gradients(const GruParams& p, const DenseParams& dense,
                                   const Matrix& window_batch, const Matrix& target_batch) {
  detail::check_batch_shapes(dense.steps(), window_batch, target_batch);
  GruBatchTrace trace;
  gru_forward_batch(p, dense, window_batch, &trace);

  const std::size_t w = window_batch.cols();
  const std::size_t batch = window_batch.rows();
  const std::size_t units = p.units();

  GruGradients out;
  out.cell = zeros_like(p);
  auto head = detail::head_backward(dense, trace.act.back(), target_batch);
  out.dense = std::move(head.dense_grad);
  out.loss = head.loss;

  const Matrix zero_state(units, batch);
  Matrix d_act = std::move(head.d_act);

  for (std::size_t step = w; step-- > 0;) {
    const Matrix& x_t = trace.x[step];
    const Matrix& gate_z = trace.gate_z[step];
    const Matrix& gate_r = trace.gate_r[step];
    const Matrix& cand = trace.cand[step];
    const Matrix& rec_cand = trace.rec_cand[step];
    const Matrix& h_prev = step > 0 ? trace.act[step - 1] : zero_state;

    // h = (1 - z) . h_prev + z . candidate
    const Matrix d_pre_z = detail::sigmoid_backward(gate_z, hadamard(d_act, cand - h_prev));
    const Matrix d_pre_c = detail::tanh_backward_from_output(cand, hadamard(d_act, gate_z));
    const Matrix d_pre_r = detail::sigmoid_backward(gate_r, hadamard(d_pre_c, rec_cand));
    const Matrix d_pre_c_gated = hadamard(d_pre_c, gate_r);

    const Matrix x_T = transpose(x_t);
    const Matrix h_prev_T = transpose(h_prev);
    out.cell.w_z += matmul(d_pre_z, x_T);
    out.cell.u_z += matmul(d_pre_z, h_prev_T);
    out.cell.w_r += matmul(d_pre_r, x_T);
    out.cell.u_r += matmul(d_pre_r, h_prev_T);
    out.cell.w_h += matmul(d_pre_c, x_T);
    out.cell.u_h += matmul(d_pre_c_gated, h_prev_T);

    const Matrix one_minus_z = map(gate_z, [](double v) { return 1.0 - v; });
    Matrix d_prev = hadamard(d_act, one_minus_z);
    d_prev += matmul(transpose(p.u_z), d_pre_z);
    d_prev += matmul(transpose(p.u_r), d_pre_r);
    d_prev += matmul(transpose(p.u_h), d_pre_c_gated);
    d_act = std::move(d_prev);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter flattening: a fixed-order list of spans over every learnable
// value. Adam states and gradient clipping work on these views.
// ---------------------------------------------------------------------------

inline std::vector<std::span<double>> param_spans(LstmParams& p, DenseParams& d) {
  return {p.w_i.data(), p.w_f.data(), p.w_o.data(), p.w_c.data(),
          p.u_i.data(), p.u_f.data(), p.u_o.data(), p.u_c.data(),
          std::span<double>(p.v_i), std::span<double>(p.v_f), std::span<double>(p.v_o),
          d.w.data(),   std::span<double>(d.b)};
}

inline std::vector<std::span<const double>> param_spans(const LstmParams& p,
                                                        const DenseParams& d) {
  return {p.w_i.data(), p.w_f.data(), p.w_o.data(), p.w_c.data(),
          p.u_i.data(), p.u_f.data(), p.u_o.data(), p.u_c.data(),
          std::span<const double>(p.v_i), std::span<const double>(p.v_f),
          std::span<const double>(p.v_o), d.w.data(), std::span<const double>(d.b)};
}

inline std::vector<std::span<double>> param_spans(GruParams& p, DenseParams& d) {
  return {p.w_z.data(), p.w_r.data(), p.w_h.data(), p.u_z.data(), p.u_r.data(), p.u_h.data(),
          d.w.data(),   std::span<double>(d.b)};
}

inline std::vector<std::span<const double>> param_spans(const GruParams& p,
                                                        const DenseParams& d) {
  return {p.w_z.data(), p.w_r.data(), p.w_h.data(), p.u_z.data(), p.u_r.data(), p.u_h.data(),
          d.w.data(),   std::span<const double>(d.b)};
}

/// Bias-corrected Adam. Moment buffers are allocated on first use and must
/// keep matching shapes afterwards; the step counter advances once per call.
struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m, v;
};

inline void adam_update(std::vector<std::span<double>> params,
                        const std::vector<std::span<const double>>& grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_update: " + std::to_string(params.size()) + " parameter views vs " +
                     std::to_string(grads.size()) + " gradient views");
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0);
      state.v[i].assign(params[i].size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_update: state tracks " + std::to_string(state.m.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    auto g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (p.size() != g.size() || p.size() != m.size()) {
      throw ShapeError("adam_update: size mismatch in parameter " + std::to_string(i));
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

/// Scales all gradients so their global L2 norm does not exceed max_norm.
inline void clip_gradients(std::vector<std::span<double>> grads, double max_norm) {
  double sq = 0.0;
  for (auto g : grads)
    for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto g : grads)
      for (double& v : g) v *= factor;
  }
}

// ---------------------------------------------------------------------------
// Training loop.
// ---------------------------------------------------------------------------

struct TrainResult {
  TrainedModel model;
  std::vector<double> loss_history;  // one entry per epoch
};

namespace detail {

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(idx[r], c);
  return out;
}

template <typename P>
TrainResult train_cell(P cell, DenseParams dense, const WindowedDataset& data,
                       const TrainConfig& cfg, CellKind kind, Rng& rng) {
  AdamState adam;
  adam.lr = cfg.learning_rate;

  std::vector<std::size_t> order(data.n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult out;
  out.loss_history.reserve(cfg.epochs);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const Matrix xb = gather_rows(data.x, idx);
      const Matrix yb = gather_rows(data.y, idx);

      auto grads = bptt_gradients(cell, dense, xb, yb);
      if (!std::isfinite(grads.loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch starting at row " + std::to_string(begin));
      }
      if (cfg.gradient_clip) {
        clip_gradients(param_spans(grads.cell, grads.dense), *cfg.gradient_clip);
      }
      const auto grad_views = param_spans(std::as_const(grads.cell), std::as_const(grads.dense));
      adam_update(param_spans(cell, dense), grad_views, adam);
      loss_sum += grads.loss * static_cast<double>(idx.size());
    }
    const double epoch_loss = loss_sum / static_cast<double>(data.n_train);
    if (!std::isfinite(epoch_loss)) {
      throw NumericError("train: non-finite epoch loss at epoch " + std::to_string(epoch));
    }
    out.loss_history.push_back(epoch_loss);
  }

  out.model.kind = kind;
  out.model.cell = std::move(cell);
  out.model.dense = std::move(dense);
  out.model.config = cfg;
  out.model.trained_window = data.window;
  out.model.final_loss = out.loss_history.back();
  return out;
}

}  // namespace detail

/// Trains a model of the requested kind on the first n_train rows of the
/// dataset: seeded initialization, per-epoch seeded shuffling, mini-batch
/// Adam on the MSE loss. Test rows are never touched.
inline TrainResult train(CellKind kind, const WindowedDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.n_train < 1) throw ConfigError("train: dataset has no training rows");
  if (data.rows() < data.n_train) throw ConfigError("train: n_train exceeds dataset rows");

  Rng rng(cfg.seed);
  if (kind == CellKind::Lstm) {
    LstmParams cell = init_lstm(cfg.units, 1, rng, cfg.peepholes, cfg.output_peephole_prev_cell);
    DenseParams dense = init_dense(data.horizon, cfg.units, rng);
    return detail::train_cell(std::move(cell), std::move(dense), data, cfg, kind, rng);
  }
  GruParams cell = init_gru(cfg.units, 1, rng);
  DenseParams dense = init_dense(data.horizon, cfg.units, rng);
  return detail::train_cell(std::move(cell), std::move(dense), data, cfg, kind, rng);
}

}  // namespace tscast
