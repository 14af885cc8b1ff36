#pragma once

// Gated recurrent cells and the dense readout head.
//
// The LSTM carries a memory cell c alongside the activation h and gates it
// with input/forget/output gates; the gate pre-activations include diagonal
// peephole terms that read the memory cell directly. The output gate peeks
// at the freshly written cell, the forget and input gates at the previous
// one, which fixes the evaluation order within a step:
//
//   candidate -> forget, input -> new cell -> output -> activation.
//
// The GRU has no separate memory cell; update and reset gates interpolate
// between the previous activation and a candidate activation.
//
// There are no bias vectors in the gate pre-activations; the dense head is
// a conventional affine layer. Forward passes are implemented batched (one
// independent sequence per column); the single-sample entry points wrap a
// batch of one and return plain vectors.

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tscast/activations.hpp"
#include "tscast/errors.hpp"
#include "tscast/matrix.hpp"
#include "tscast/rng.hpp"

namespace tscast {

enum class CellKind { Lstm, Gru };

inline const char* to_string(CellKind k) { return k == CellKind::Lstm ? "lstm" : "gru"; }

/// LSTM weights. W_* act on the input, U_* on the previous activation,
/// v_* are the diagonals of the peephole matrices.
struct LstmParams {
  Matrix w_i, w_f, w_o, w_c;          // units x input_dim
  Matrix u_i, u_f, u_o, u_c;          // units x units
  std::vector<double> v_i, v_f, v_o;  // length units
  bool peepholes = true;
  // When set, the output gate reads the previous cell value instead of the
  // freshly written one.
  bool output_peephole_prev_cell = false;

  std::size_t units() const { return w_i.rows(); }
  std::size_t input_dim() const { return w_i.cols(); }
};

/// GRU weights; subscripts z and r are the update and reset gates, h the
/// candidate activation.
struct GruParams {
  Matrix w_z, w_r, w_h;  // units x input_dim
  Matrix u_z, u_r, u_h;  // units x units

  std::size_t units() const { return w_z.rows(); }
  std::size_t input_dim() const { return w_z.cols(); }
};

using CellParams = std::variant<LstmParams, GruParams>;

inline CellKind kind_of(const CellParams& cell) {
  return std::holds_alternative<LstmParams>(cell) ? CellKind::Lstm : CellKind::Gru;
}

/// Affine readout mapping the final activation to one value per forecast
/// step: prediction = w * h + b.
struct DenseParams {
  Matrix w;               // steps x units
  std::vector<double> b;  // length steps

  std::size_t steps() const { return w.rows(); }
  std::size_t units() const { return w.cols(); }
};

/// Recurrent state. GRU states carry no memory cell (c stays empty).
struct CellState {
  std::vector<double> h;
  std::vector<double> c;
};

inline CellState zero_state(CellKind kind, std::size_t units) {
  CellState s;
  s.h.assign(units, 0.0);
  if (kind == CellKind::Lstm) s.c.assign(units, 0.0);
  return s;
}

// ---------------------------------------------------------------------------
// Initialization. The draw order is fixed so a seed fully determines the
// model: gate input weights, gate recurrent weights, peepholes, dense head.
// ---------------------------------------------------------------------------

inline std::vector<double> init_peephole(std::size_t units, Rng& rng) {
  std::vector<double> v(units);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

inline LstmParams init_lstm(std::size_t units, std::size_t input_dim, Rng& rng,
                            bool peepholes = true,
                            bool output_peephole_prev_cell = false) {
  LstmParams p;
  p.w_i = init_weights(units, input_dim, rng);
  p.w_f = init_weights(units, input_dim, rng);
  p.w_o = init_weights(units, input_dim, rng);
  p.w_c = init_weights(units, input_dim, rng);
  p.u_i = init_weights(units, units, rng);
  p.u_f = init_weights(units, units, rng);
  p.u_o = init_weights(units, units, rng);
  p.u_c = init_weights(units, units, rng);
  p.v_i = init_peephole(units, rng);
  p.v_f = init_peephole(units, rng);
  p.v_o = init_peephole(units, rng);
  p.peepholes = peepholes;
  p.output_peephole_prev_cell = output_peephole_prev_cell;
  return p;
}

inline GruParams init_gru(std::size_t units, std::size_t input_dim, Rng& rng) {
  GruParams p;
  p.w_z = init_weights(units, input_dim, rng);
  p.w_r = init_weights(units, input_dim, rng);
  p.w_h = init_weights(units, input_dim, rng);
  p.u_z = init_weights(units, units, rng);
  p.u_r = init_weights(units, units, rng);
  p.u_h = init_weights(units, units, rng);
  return p;
}

inline DenseParams init_dense(std::size_t steps, std::size_t units, Rng& rng) {
  DenseParams d;
  d.w = init_weights(steps, units, rng);
  d.b.assign(steps, 0.0);
  return d;
}

namespace detail {

// pre(j, b) += v[j] * cell(j, b): diagonal peephole applied column-wise.
inline void add_peephole(Matrix& pre, std::span<const double> v, const Matrix& cell) {
  for (std::size_t r = 0; r < pre.rows(); ++r)
    for (std::size_t c = 0; c < pre.cols(); ++c) pre(r, c) += v[r] * cell(r, c);
}

inline void add_bias_rows(Matrix& m, std::span<const double> b) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) += b[r];
}

inline Matrix column_matrix(std::span<const double> v) {
  Matrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

inline std::vector<double> column_of(const Matrix& m, std::size_t col) {
  std::vector<double> v(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) v[r] = m(r, col);
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Batched forward dynamics. States are units x batch; x_t is input_dim x
// batch. Trace records keep everything the backward pass needs.
// ---------------------------------------------------------------------------

struct LstmBatchTrace {
  std::vector<Matrix> x;       // input_dim x B per step
  std::vector<Matrix> gate_i, gate_f, gate_o;
  std::vector<Matrix> cand;    // tanh candidate
  std::vector<Matrix> cell;    // c_t
  std::vector<Matrix> act;     // h_t
};

struct GruBatchTrace {
  std::vector<Matrix> x;
  std::vector<Matrix> gate_z, gate_r;
  std::vector<Matrix> cand;      // tanh candidate
  std::vector<Matrix> act;       // h_t
  std::vector<Matrix> rec_cand;  // u_h * h_{t-1}, needed for the reset-gate gradient
};

inline void lstm_step_batch(const LstmParams& p, const Matrix& x_t, Matrix& h, Matrix& c,
                            LstmBatchTrace* trace) {
  if (x_t.rows() != p.input_dim()) {
    throw ShapeError("lstm_step: input " + x_t.shape() + " does not match input_dim " +
                     std::to_string(p.input_dim()));
  }
  if (h.rows() != p.units() || c.rows() != p.units() || h.cols() != x_t.cols() ||
      c.cols() != x_t.cols()) {
    throw ShapeError("lstm_step: state " + h.shape() + "/" + c.shape() +
                     " does not match units " + std::to_string(p.units()) + ", batch " +
                     std::to_string(x_t.cols()));
  }

  const Matrix cand = tanh(matmul(p.w_c, x_t) + matmul(p.u_c, h));

  Matrix pre_f = matmul(p.w_f, x_t) + matmul(p.u_f, h);
  Matrix pre_i = matmul(p.w_i, x_t) + matmul(p.u_i, h);
  if (p.peepholes) {
    detail::add_peephole(pre_f, p.v_f, c);
    detail::add_peephole(pre_i, p.v_i, c);
  }
  const Matrix gate_f = sigmoid(pre_f);
  const Matrix gate_i = sigmoid(pre_i);

  Matrix c_new = hadamard(gate_f, c) + hadamard(gate_i, cand);

  Matrix pre_o = matmul(p.w_o, x_t) + matmul(p.u_o, h);
  if (p.peepholes) {
    detail::add_peephole(pre_o, p.v_o, p.output_peephole_prev_cell ? c : c_new);
  }
  const Matrix gate_o = sigmoid(pre_o);
  Matrix h_new = hadamard(gate_o, tanh(c_new));

  if (trace) {
    trace->x.push_back(x_t);
    trace->gate_i.push_back(gate_i);
    trace->gate_f.push_back(gate_f);
    trace->gate_o.push_back(gate_o);
    trace->cand.push_back(cand);
    trace->cell.push_back(c_new);
    trace->act.push_back(h_new);
  }
  c = std::move(c_new);
  h = std::move(h_new);
}

inline void gru_step_batch(const GruParams& p, const Matrix& x_t, Matrix& h,
                           GruBatchTrace* trace) {
  if (x_t.rows() != p.input_dim()) {
    throw ShapeError("gru_step: input " + x_t.shape() + " does not match input_dim " +
                     std::to_string(p.input_dim()));
  }
  if (h.rows() != p.units() || h.cols() != x_t.cols()) {
    throw ShapeError("gru_step: state " + h.shape() + " does not match units " +
                     std::to_string(p.units()) + ", batch " + std::to_string(x_t.cols()));
  }

  const Matrix gate_z = sigmoid(matmul(p.w_z, x_t) + matmul(p.u_z, h));
  const Matrix gate_r = sigmoid(matmul(p.w_r, x_t) + matmul(p.u_r, h));
  Matrix rec_cand = matmul(p.u_h, h);
  const Matrix cand = tanh(matmul(p.w_h, x_t) + hadamard(gate_r, rec_cand));

  // h_new = (1 - z) . h + z . candidate
  const Matrix one_minus_z = map(gate_z, [](double v) { return 1.0 - v; });
  Matrix h_new = hadamard(one_minus_z, h) + hadamard(gate_z, cand);

  if (trace) {
    trace->x.push_back(x_t);
    trace->gate_z.push_back(gate_z);
    trace->gate_r.push_back(gate_r);
    trace->cand.push_back(cand);
    trace->act.push_back(h_new);
    trace->rec_cand.push_back(std::move(rec_cand));
  }
  h = std::move(h_new);
}

namespace detail {

inline void check_forward_shapes(std::size_t input_dim, std::size_t cell_units,
                                 const DenseParams& dense) {
  if (input_dim != 1) {
    throw ShapeError("forward: window inputs are scalar, input_dim must be 1, got " +
                     std::to_string(input_dim));
  }
  if (dense.units() != cell_units) {
    throw ShapeError("forward: dense head expects " + std::to_string(dense.units()) +
                     " units, cell has " + std::to_string(cell_units));
  }
}

inline Matrix step_inputs(const Matrix& windows, std::size_t t) {
  Matrix x_t(1, windows.rows());
  for (std::size_t b = 0; b < windows.rows(); ++b) x_t(0, b) = windows(b, t);
  return x_t;
}

inline Matrix readout(const DenseParams& dense, const Matrix& h) {
  Matrix pred = matmul(dense.w, h);  // steps x B
  add_bias_rows(pred, dense.b);
  return transpose(pred);  // B x steps
}

}  // namespace detail

/// Runs every row of `windows` (one window per row, scalar input per step)
/// through the cell from a zero state and applies the dense head to the
/// final activation. Returns one prediction row per window.
inline Matrix lstm_forward_batch(const LstmParams& p, const DenseParams& dense,
                                 const Matrix& windows, LstmBatchTrace* trace = nullptr) {
  detail::check_forward_shapes(p.input_dim(), p.units(), dense);
  Matrix h(p.units(), windows.rows());
  Matrix c(p.units(), windows.rows());
  for (std::size_t t = 0; t < windows.cols(); ++t) {
    lstm_step_batch(p, detail::step_inputs(windows, t), h, c, trace);
  }
  return detail::readout(dense, h);
}

inline Matrix gru_forward_batch(const GruParams& p, const DenseParams& dense,
                                const Matrix& windows, GruBatchTrace* trace = nullptr) {
  detail::check_forward_shapes(p.input_dim(), p.units(), dense);
  Matrix h(p.units(), windows.rows());
  for (std::size_t t = 0; t < windows.cols(); ++t) {
    gru_step_batch(p, detail::step_inputs(windows, t), h, trace);
  }
  return detail::readout(dense, h);
}

inline Matrix forward_batch(const CellParams& cell, const DenseParams& dense,
                            const Matrix& windows) {
  return std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LstmParams>) {
          return lstm_forward_batch(p, dense, windows);
        } else {
          return gru_forward_batch(p, dense, windows);
        }
      },
      cell);
}

// ---------------------------------------------------------------------------
// Single-sample API.
// ---------------------------------------------------------------------------

struct LstmStepResult {
  CellState state;
  std::vector<double> gate_i, gate_f, gate_o, candidate;
};

struct GruStepResult {
  CellState state;
  std::vector<double> gate_z, gate_r, candidate;
};

inline LstmStepResult lstm_step(const LstmParams& p, std::span<const double> x_t,
                                const CellState& prev) {
  if (prev.h.size() != p.units() || prev.c.size() != p.units()) {
    throw ShapeError("lstm_step: state size " + std::to_string(prev.h.size()) + "/" +
                     std::to_string(prev.c.size()) + " does not match units " +
                     std::to_string(p.units()));
  }
  Matrix h = detail::column_matrix(prev.h);
  Matrix c = detail::column_matrix(prev.c);
  LstmBatchTrace trace;
  lstm_step_batch(p, detail::column_matrix(x_t), h, c, &trace);
  LstmStepResult out;
  out.state.h = detail::column_of(h, 0);
  out.state.c = detail::column_of(c, 0);
  out.gate_i = detail::column_of(trace.gate_i[0], 0);
  out.gate_f = detail::column_of(trace.gate_f[0], 0);
  out.gate_o = detail::column_of(trace.gate_o[0], 0);
  out.candidate = detail::column_of(trace.cand[0], 0);
  return out;
}

inline GruStepResult gru_step(const GruParams& p, std::span<const double> x_t,
                              const CellState& prev) {
  if (prev.h.size() != p.units()) {
    throw ShapeError("gru_step: state size " + std::to_string(prev.h.size()) +
                     " does not match units " + std::to_string(p.units()));
  }
  Matrix h = detail::column_matrix(prev.h);
  GruBatchTrace trace;
  gru_step_batch(p, detail::column_matrix(x_t), h, &trace);
  GruStepResult out;
  out.state.h = detail::column_of(h, 0);
  out.gate_z = detail::column_of(trace.gate_z[0], 0);
  out.gate_r = detail::column_of(trace.gate_r[0], 0);
  out.candidate = detail::column_of(trace.cand[0], 0);
  return out;
}

/// Per-step record of one window's forward pass. LSTM fills the
/// input/forget/output gate columns and the memory cells; GRU fills the
/// update/reset gates. Candidates and activations are common to both.
struct ForwardTrace {
  CellKind kind = CellKind::Lstm;
  std::vector<double> inputs;
  std::vector<std::vector<double>> gates_input, gates_forget, gates_output;
  std::vector<std::vector<double>> gates_update, gates_reset;
  std::vector<std::vector<double>> candidates;
  std::vector<std::vector<double>> cells;
  std::vector<std::vector<double>> activations;

  std::size_t steps() const { return inputs.size(); }
};

struct ForwardResult {
  std::vector<double> prediction;
  ForwardTrace trace;
};

inline ForwardResult forward_window(const LstmParams& p, const DenseParams& dense,
                                    std::span<const double> window, bool keep_trace = true) {
  Matrix windows(1, window.size());
  for (std::size_t t = 0; t < window.size(); ++t) windows(0, t) = window[t];
  LstmBatchTrace trace;
  const Matrix pred = lstm_forward_batch(p, dense, windows, keep_trace ? &trace : nullptr);
  ForwardResult out;
  out.prediction = detail::column_of(transpose(pred), 0);
  out.trace.kind = CellKind::Lstm;
  if (keep_trace) {
    for (std::size_t t = 0; t < trace.x.size(); ++t) {
      out.trace.inputs.push_back(trace.x[t](0, 0));
      out.trace.gates_input.push_back(detail::column_of(trace.gate_i[t], 0));
      out.trace.gates_forget.push_back(detail::column_of(trace.gate_f[t], 0));
      out.trace.gates_output.push_back(detail::column_of(trace.gate_o[t], 0));
      out.trace.candidates.push_back(detail::column_of(trace.cand[t], 0));
      out.trace.cells.push_back(detail::column_of(trace.cell[t], 0));
      out.trace.activations.push_back(detail::column_of(trace.act[t], 0));
    }
  }
  return out;
}

inline ForwardResult forward_window(const GruParams& p, const DenseParams& dense,
                                    std::span<const double> window, bool keep_trace = true) {
  Matrix windows(1, window.size());
  for (std::size_t t = 0; t < window.size(); ++t) windows(0, t) = window[t];
  GruBatchTrace trace;
  const Matrix pred = gru_forward_batch(p, dense, windows, keep_trace ? &trace : nullptr);
  ForwardResult out;
  out.prediction = detail::column_of(transpose(pred), 0);
  out.trace.kind = CellKind::Gru;
  if (keep_trace) {
    for (std::size_t t = 0; t < trace.x.size(); ++t) {
      out.trace.inputs.push_back(trace.x[t](0, 0));
      out.trace.gates_update.push_back(detail::column_of(trace.gate_z[t], 0));
      out.trace.gates_reset.push_back(detail::column_of(trace.gate_r[t], 0));
      out.trace.candidates.push_back(detail::column_of(trace.cand[t], 0));
      out.trace.activations.push_back(detail::column_of(trace.act[t], 0));
    }
  }
  return out;
}

inline ForwardResult forward_window(const CellParams& cell, const DenseParams& dense,
                                    std::span<const double> window, bool keep_trace = true) {
  return std::visit([&](const auto& p) { return forward_window(p, dense, window, keep_trace); },
                    cell);
}

}  // namespace tscast
