#pragma once

// Model checkpoints: a flat text layout of named tensors with shapes and
// row-major values. Doubles are written with 17 significant digits, so a
// save/load cycle reproduces the model exactly.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tscast/cells.hpp"
#include "tscast/errors.hpp"
#include "tscast/training.hpp"

namespace tscast {

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "tensor " << name << " " << m.rows() << " " << m.cols() << "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << " ";
      out << fmt17(m(r, c));
    }
    out << "\n";
  }
}

inline void write_tensor(std::ostream& out, const std::string& name,
                         const std::vector<double>& v) {
  Matrix m(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  write_tensor(out, name, m);
}

class CheckpointReader {
 public:
  explicit CheckpointReader(std::istream& in, std::string context)
      : in_(in), context_(std::move(context)) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw DataError(context_ + ": truncated checkpoint");
    return w;
  }

  void expect(const std::string& token) {
    const std::string w = word();
    if (w != token) {
      throw DataError(context_ + ": expected '" + token + "', found '" + w + "'");
    }
  }

  std::size_t count() {
    const std::string w = word();
    try {
      return static_cast<std::size_t>(std::stoull(w));
    } catch (const std::exception&) {
      throw DataError(context_ + ": expected a count, found '" + w + "'");
    }
  }

  double number() {
    double v;
    if (!(in_ >> v)) throw DataError(context_ + ": expected a number");
    return v;
  }

  Matrix tensor(const std::string& name) {
    expect("tensor");
    expect(name);
    const std::size_t rows = count();
    const std::size_t cols = count();
    Matrix m(rows, cols);
    for (double& v : m.data()) v = number();
    return m;
  }

  std::vector<double> tensor_vector(const std::string& name) {
    const Matrix m = tensor(name);
    if (m.cols() != 1) throw DataError(context_ + ": tensor '" + name + "' is not a vector");
    std::vector<double> v(m.data().begin(), m.data().end());
    return v;
  }

 private:
  std::istream& in_;
  std::string context_;
};

}  // namespace detail

inline void save_model(std::ostream& out, const TrainedModel& model) {
  out << "tscast-model v1\n";
  out << "kind " << to_string(model.kind) << "\n";
  out << "window " << model.trained_window << "\n";
  out << "final_loss " << detail::fmt17(model.final_loss) << "\n";
  const TrainConfig& c = model.config;
  out << "config " << c.epochs << " " << c.batch_size << " " << detail::fmt17(c.learning_rate)
      << " " << c.seed << " " << c.units << " "
      << (c.gradient_clip ? detail::fmt17(*c.gradient_clip) : "none") << " "
      << (c.peepholes ? 1 : 0) << " " << (c.output_peephole_prev_cell ? 1 : 0) << "\n";
  if (model.kind == CellKind::Lstm) {
    const auto& p = std::get<LstmParams>(model.cell);
    detail::write_tensor(out, "w_i", p.w_i);
    detail::write_tensor(out, "w_f", p.w_f);
    detail::write_tensor(out, "w_o", p.w_o);
    detail::write_tensor(out, "w_c", p.w_c);
    detail::write_tensor(out, "u_i", p.u_i);
    detail::write_tensor(out, "u_f", p.u_f);
    detail::write_tensor(out, "u_o", p.u_o);
    detail::write_tensor(out, "u_c", p.u_c);
    detail::write_tensor(out, "v_i", p.v_i);
    detail::write_tensor(out, "v_f", p.v_f);
    detail::write_tensor(out, "v_o", p.v_o);
  } else {
    const auto& p = std::get<GruParams>(model.cell);
    detail::write_tensor(out, "w_z", p.w_z);
    detail::write_tensor(out, "w_r", p.w_r);
    detail::write_tensor(out, "w_h", p.w_h);
    detail::write_tensor(out, "u_z", p.u_z);
    detail::write_tensor(out, "u_r", p.u_r);
    detail::write_tensor(out, "u_h", p.u_h);
  }
  detail::write_tensor(out, "dense_w", model.dense.w);
  detail::write_tensor(out, "dense_b", model.dense.b);
  out << "end\n";
}

inline void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  std::ofstream out(path);
  if (!out) throw DataError("save_model: cannot open '" + path.string() + "'");
  save_model(out, model);
}

inline TrainedModel load_model(std::istream& in, const std::string& context) {
  detail::CheckpointReader r(in, context);
  r.expect("tscast-model");
  r.expect("v1");
  r.expect("kind");
  const std::string kind = r.word();
  if (kind != "lstm" && kind != "gru") {
    throw DataError(context + ": unknown cell kind '" + kind + "'");
  }

  TrainedModel model;
  model.kind = kind == "lstm" ? CellKind::Lstm : CellKind::Gru;
  r.expect("window");
  model.trained_window = r.count();
  r.expect("final_loss");
  model.final_loss = r.number();
  r.expect("config");
  model.config.epochs = r.count();
  model.config.batch_size = r.count();
  model.config.learning_rate = r.number();
  model.config.seed = r.count();
  model.config.units = r.count();
  const std::string clip = r.word();
  if (clip != "none") model.config.gradient_clip = std::stod(clip);
  model.config.peepholes = r.count() != 0;
  model.config.output_peephole_prev_cell = r.count() != 0;

  if (model.kind == CellKind::Lstm) {
    LstmParams p;
    p.w_i = r.tensor("w_i");
    p.w_f = r.tensor("w_f");
    p.w_o = r.tensor("w_o");
    p.w_c = r.tensor("w_c");
    p.u_i = r.tensor("u_i");
    p.u_f = r.tensor("u_f");
    p.u_o = r.tensor("u_o");
    p.u_c = r.tensor("u_c");
    p.v_i = r.tensor_vector("v_i");
    p.v_f = r.tensor_vector("v_f");
    p.v_o = r.tensor_vector("v_o");
    p.peepholes = model.config.peepholes;
    p.output_peephole_prev_cell = model.config.output_peephole_prev_cell;
    model.cell = std::move(p);
  } else {
    GruParams p;
    p.w_z = r.tensor("w_z");
    p.w_r = r.tensor("w_r");
    p.w_h = r.tensor("w_h");
    p.u_z = r.tensor("u_z");
    p.u_r = r.tensor("u_r");
    p.u_h = r.tensor("u_h");
    model.cell = std::move(p);
  }
  model.dense.w = r.tensor("dense_w");
  model.dense.b = r.tensor_vector("dense_b");
  r.expect("end");
  return model;
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_model: cannot open '" + path.string() + "'");
  return load_model(in, "load_model: '" + path.string() + "'");
}

}  // namespace tscast
