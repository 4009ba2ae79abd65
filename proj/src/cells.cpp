#include "ngram/cells.hpp"

#include <cmath>

#include "ngram/errors.hpp"

namespace ngram {

std::string to_string(CellKind kind) {
  switch (kind) {
    case CellKind::Elman:
      return "elman";
    case CellKind::GRU:
      return "gru";
    case CellKind::LSTM:
      return "lstm";
  }
  return "?";
}

CellKind parse_cell_kind(const std::string& name) {
  if (name == "elman" || name == "E") return CellKind::Elman;
  if (name == "gru" || name == "G") return CellKind::GRU;
  if (name == "lstm" || name == "L") return CellKind::LSTM;
  throw ConfigError("unknown cell kind '" + name + "'");
}

std::vector<std::string> CellParams::input_weight_names(CellKind kind) {
  switch (kind) {
    case CellKind::Elman:
      return {"W_in"};
    case CellKind::GRU:
      return {"W_ir", "W_iz", "W_in"};
    case CellKind::LSTM:
      return {"W_ii", "W_if", "W_io", "W_ic"};
  }
  return {};
}

std::vector<std::string> CellParams::recurrent_weight_names(CellKind kind) {
  switch (kind) {
    case CellKind::Elman:
      return {"W_ih"};
    case CellKind::GRU:
      return {"W_hr", "W_hz", "W_hn"};
    case CellKind::LSTM:
      return {"W_hi", "W_hf", "W_ho", "W_hc"};
  }
  return {};
}

std::vector<std::string> CellParams::bias_names(CellKind kind) {
  switch (kind) {
    case CellKind::Elman:
      return {"b_h"};
    case CellKind::GRU:
      return {"b_r", "b_z", "b_n"};
    case CellKind::LSTM:
      return {"b_i", "b_f", "b_o", "b_c"};
  }
  return {};
}

CellParams CellParams::init(CellKind kind, std::size_t input_dim, std::size_t hidden_dim, Rng& rng,
                            bool with_bias) {
  if (input_dim == 0 || hidden_dim == 0) throw ContractError("cell dimensions must be positive");
  CellParams p;
  p.kind = kind;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.has_bias = with_bias;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  auto uniform_matrix = [&](std::size_t rows, std::size_t cols) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::matrix(rows, cols, std::move(v));
  };
  for (const auto& name : input_weight_names(kind)) {
    p.weights[name] = Parameter{name, uniform_matrix(hidden_dim, input_dim)};
  }
  for (const auto& name : recurrent_weight_names(kind)) {
    p.weights[name] = Parameter{name, uniform_matrix(hidden_dim, hidden_dim)};
  }
  if (with_bias) {
    for (const auto& name : bias_names(kind)) p.weights[name] = Parameter{name, Tensor::zeros({hidden_dim})};
  }
  return p;
}

const Tensor& CellParams::W(const std::string& name) const {
  auto it = weights.find(name);
  if (it == weights.end()) throw ContractError(to_string(kind) + " cell has no weight '" + name + "'");
  return it->second.value;
}

Parameter& CellParams::param(const std::string& name) {
  auto it = weights.find(name);
  if (it == weights.end()) throw ContractError(to_string(kind) + " cell has no weight '" + name + "'");
  return it->second;
}

std::vector<Parameter*> CellParams::parameters() {
  std::vector<Parameter*> out;
  for (auto& [name, p] : weights) out.push_back(&p);
  return out;
}

void CellParams::validate() const {
  if (activation == Activation::Identity && kind != CellKind::Elman) {
    throw ContractError("identity activation is only defined for the Elman cell");
  }
  auto expect = [&](const std::string& name, Shape shape) {
    const Tensor& t = W(name);
    if (t.shape() != shape) {
      throw ShapeError("weight " + name + " has shape " + shape_string(t.shape()) + ", expected " +
                       shape_string(shape));
    }
  };
  for (const auto& n : input_weight_names(kind)) expect(n, {hidden_dim, input_dim});
  for (const auto& n : recurrent_weight_names(kind)) expect(n, {hidden_dim, hidden_dim});
  if (has_bias) {
    for (const auto& n : bias_names(kind)) expect(n, {hidden_dim});
  }
}

CellState CellState::zero(const CellParams& params) {
  CellState s;
  s.h = Tensor::zeros({params.hidden_dim});
  if (params.kind == CellKind::LSTM) s.c = Tensor::zeros({params.hidden_dim});
  return s;
}

Tensor CellState::stacked() const {
  if (!c) return h;
  std::vector<double> v(c->values());
  v.insert(v.end(), h.data().begin(), h.data().end());
  return Tensor::vector(std::move(v));
}

CellState CellState::from_stacked(const CellParams& params, const Tensor& stacked) {
  const std::size_t d = params.hidden_dim;
  if (stacked.size() != params.state_dim()) throw ShapeError("stacked state has wrong length");
  CellState s;
  if (params.kind == CellKind::LSTM) {
    auto v = stacked.data();
    s.c = Tensor::vector(std::vector<double>(v.begin(), v.begin() + d));
    s.h = Tensor::vector(std::vector<double>(v.begin() + d, v.end()));
  } else {
    s.h = stacked;
  }
  return s;
}

CellVars CellVars::bind(Tape& tape, CellParams& params) {
  params.validate();
  CellVars v;
  v.kind = params.kind;
  v.activation = params.activation;
  v.hidden_dim = params.hidden_dim;
  v.has_bias = params.has_bias;
  for (auto& [name, p] : params.weights) v.w[name] = tape.param(p);
  return v;
}

CellVars CellVars::constants(Tape& tape, const CellParams& params) {
  params.validate();
  CellVars v;
  v.kind = params.kind;
  v.activation = params.activation;
  v.hidden_dim = params.hidden_dim;
  v.has_bias = params.has_bias;
  for (const auto& [name, p] : params.weights) v.w[name] = tape.constant(p.value);
  return v;
}

const Var& CellVars::operator[](const std::string& name) const {
  auto it = w.find(name);
  if (it == w.end()) throw ContractError("cell has no weight '" + name + "'");
  return it->second;
}

CellStateVar zero_state(Tape& tape, const CellVars& cell) {
  CellStateVar s;
  s.h = tape.constant(Tensor::zeros({cell.hidden_dim}));
  if (cell.kind == CellKind::LSTM) s.c = tape.constant(Tensor::zeros({cell.hidden_dim}));
  return s;
}

CellStateVar cell_step(const CellVars& cell, const Var& x, const CellStateVar& state) {
  const Var& h = state.h;
  if (h.value().size() != cell.hidden_dim) {
    throw ShapeError("cell_step: state has length " + std::to_string(h.value().size()) + ", expected " +
                     std::to_string(cell.hidden_dim));
  }
  auto pre = [&](const char* wi, const char* wh, const char* b) {
    Var u = matmul(cell[wi], x) + matmul(cell[wh], h);
    if (cell.has_bias) u = u + cell[b];
    return u;
  };

  CellStateVar next;
  switch (cell.kind) {
    case CellKind::Elman: {
      Var u = pre("W_in", "W_ih", "b_h");
      next.h = cell.activation == Activation::Identity ? u : tanh(u);
      break;
    }
    case CellKind::GRU: {
      Var r = sigmoid(pre("W_ir", "W_hr", "b_r"));
      Var z = sigmoid(pre("W_iz", "W_hz", "b_z"));
      Var un = matmul(cell["W_in"], x) + hadamard(r, matmul(cell["W_hn"], h));
      if (cell.has_bias) un = un + cell["b_n"];
      Var n = tanh(un);
      next.h = hadamard(affine(z, -1.0, 1.0), n) + hadamard(z, h);
      break;
    }
    case CellKind::LSTM: {
      if (!state.c.valid()) throw ContractError("LSTM cell_step needs a memory state");
      Var i = sigmoid(pre("W_ii", "W_hi", "b_i"));
      Var f = sigmoid(pre("W_if", "W_hf", "b_f"));
      Var o = sigmoid(pre("W_io", "W_ho", "b_o"));
      Var cm = tanh(pre("W_ic", "W_hc", "b_c"));
      next.c = hadamard(f, state.c) + hadamard(i, cm);
      next.h = hadamard(o, tanh(next.c));
      break;
    }
  }
  return next;
}

CellState cell_step(const CellParams& params, const Tensor& x, const CellState& state) {
  if (!x.is_vector() || x.size() != params.input_dim) {
    throw ShapeError("cell_step: input has shape " + shape_string(x.shape()) + ", expected [" +
                     std::to_string(params.input_dim) + "]");
  }
  Tape tape;
  const CellVars cell = CellVars::constants(tape, params);
  CellStateVar s;
  s.h = tape.constant(state.h);
  if (params.kind == CellKind::LSTM) {
    if (!state.c) throw ContractError("LSTM cell_step needs a memory state");
    s.c = tape.constant(*state.c);
  }
  const CellStateVar next = cell_step(cell, tape.constant(x), s);
  CellState out;
  out.h = next.h.value();
  if (next.c.valid()) out.c = next.c.value();
  return out;
}

std::vector<CellState> run_sequence(const CellParams& params, std::span<const Tensor> embeddings,
                                    const std::optional<CellState>& init) {
  if (embeddings.empty()) throw ContractError("run_sequence: empty sequence");
  std::vector<CellState> states;
  states.reserve(embeddings.size());
  CellState prev = init ? *init : CellState::zero(params);
  for (const auto& x : embeddings) {
    prev = cell_step(params, x, prev);
    states.push_back(prev);
  }
  return states;
}

}  // namespace ngram
