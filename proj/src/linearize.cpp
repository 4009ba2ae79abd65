#include "ngram/linearize.hpp"

#include <algorithm>
#include <cmath>

#include "ngram/errors.hpp"

namespace ngram {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::E:
      return "E";
    case Provenance::G:
      return "G";
    case Provenance::L:
      return "L";
    case Provenance::ME:
      return "ME";
  }
  return "?";
}

Provenance provenance_of(CellKind kind) {
  switch (kind) {
    case CellKind::Elman:
      return Provenance::E;
    case CellKind::GRU:
      return Provenance::G;
    case CellKind::LSTM:
      return Provenance::L;
  }
  return Provenance::G;
}

MEParams MEParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  if (input_dim == 0 || hidden_dim == 0) throw ContractError("ME dimensions must be positive");
  MEParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  auto uniform_matrix = [&](std::size_t rows, std::size_t cols) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::matrix(rows, cols, std::move(v));
  };
  p.weights["W"] = Parameter{"W", uniform_matrix(hidden_dim, input_dim)};
  p.weights["M"] = Parameter{"M", uniform_matrix(hidden_dim, hidden_dim)};
  p.weights["Wprime"] = Parameter{"Wprime", uniform_matrix(hidden_dim, input_dim)};
  return p;
}

const Tensor& MEParams::W(const std::string& name) const {
  auto it = weights.find(name);
  if (it == weights.end()) throw ContractError("ME cell has no weight '" + name + "'");
  return it->second.value;
}

Parameter& MEParams::param(const std::string& name) {
  auto it = weights.find(name);
  if (it == weights.end()) throw ContractError("ME cell has no weight '" + name + "'");
  return it->second;
}

std::vector<Parameter*> MEParams::parameters() {
  std::vector<Parameter*> out;
  for (auto& [name, p] : weights) out.push_back(&p);
  return out;
}

void MEParams::validate() const {
  auto expect = [&](const std::string& name, Shape shape) {
    if (W(name).shape() != shape) {
      throw ShapeError("ME weight " + name + " has shape " + shape_string(W(name).shape()) + ", expected " +
                       shape_string(shape));
    }
  };
  expect("W", {hidden_dim, input_dim});
  expect("M", {hidden_dim, hidden_dim});
  expect("Wprime", {hidden_dim, input_dim});
}

MEVars MEVars::bind(Tape& tape, MEParams& params) {
  params.validate();
  return MEVars{params.hidden_dim, tape.param(params.param("W")), tape.param(params.param("M")),
                tape.param(params.param("Wprime"))};
}

MEVars MEVars::constants(Tape& tape, const MEParams& params) {
  params.validate();
  return MEVars{params.hidden_dim, tape.constant(params.W("W")), tape.constant(params.W("M")),
                tape.constant(params.W("Wprime"))};
}

Var LinearStep::apply(const Var& state) const {
  if (state.value().size() != state_dim()) {
    throw ShapeError("LinearStep::apply: state has length " + std::to_string(state.value().size()) +
                     ", expected " + std::to_string(state_dim()));
  }
  switch (provenance) {
    case Provenance::E:
      return hadamard(coef[0], matmul(mats[0], state));
    case Provenance::G:
      return hadamard(coef[0], matmul(mats[0], state)) - hadamard(coef[1], matmul(mats[1], state)) +
             hadamard(coef[2], state);
    case Provenance::L: {
      const Var& gf = coef[0];
      const Var& d1 = coef[1];
      const Var& d2 = coef[2];
      const Var& k = coef[3];
      const Var& o = coef[4];
      Var c = slice(state, 0, hidden_dim);
      Var h = slice(state, hidden_dim, hidden_dim);
      Var dh = hadamard(d1, matmul(mats[0], h)) + hadamard(d2, matmul(mats[1], h));
      Var c_next = hadamard(gf, c) + dh;
      // E c + F h = k (B c + D h) + diag[o] W_ho h
      Var h_next = hadamard(k, c_next) + hadamard(o, matmul(mats[2], h));
      return concat(c_next, h_next);
    }
    case Provenance::ME:
      return hadamard(coef[0], matmul(mats[0], state)) + scale(state, 0.5);
  }
  throw ContractError("unknown provenance");
}

Var LinearStep::matrix() const {
  Tape& tape = *g.tape();
  switch (provenance) {
    case Provenance::E:
      return row_scale(coef[0], mats[0]);
    case Provenance::G:
      return row_scale(coef[0], mats[0]) - row_scale(coef[1], mats[1]) + diag_embed(coef[2]);
    case Provenance::L: {
      Var B = diag_embed(coef[0]);
      Var D = row_scale(coef[1], mats[0]) + row_scale(coef[2], mats[1]);
      Var E = row_scale(coef[3], B);
      Var F = row_scale(coef[3], D) + row_scale(coef[4], mats[2]);
      return block2x2(B, D, E, F);
    }
    case Provenance::ME:
      return row_scale(coef[0], mats[0]) + tape.constant(scale(Tensor::identity(hidden_dim), 0.5));
  }
  throw ContractError("unknown provenance");
}

LinearStep linearize_token(const CellVars& cell, const Var& x) {
  auto pre = [&](const char* wi, const char* b) {
    Var u = matmul(cell[wi], x);
    if (cell.has_bias) u = u + cell[b];
    return u;
  };

  LinearStep step;
  step.provenance = provenance_of(cell.kind);
  step.hidden_dim = cell.hidden_dim;
  switch (cell.kind) {
    case CellKind::Elman: {
      Var u = pre("W_in", "b_h");
      if (cell.activation == Activation::Identity) {
        step.coef = {affine(u, 0.0, 1.0)};
        step.g = u;
      } else {
        step.coef = {tanh_deriv(u)};
        step.g = tanh(u);
      }
      step.mats = {cell["W_ih"]};
      break;
    }
    case CellKind::GRU: {
      Var ur = pre("W_ir", "b_r");
      Var uz = pre("W_iz", "b_z");
      Var un = pre("W_in", "b_n");
      Var gr = sigmoid(ur);
      Var gz = sigmoid(uz);
      Var gn = tanh(un);
      Var fz = sigmoid_deriv(uz);
      Var fn = tanh_deriv(un);
      Var one_minus_gz = affine(gz, -1.0, 1.0);
      Var a1 = hadamard(hadamard(fn, one_minus_gz), gr);
      Var a2 = hadamard(gn, fz);
      step.coef = {a1, a2, gz};
      step.mats = {cell["W_hn"], cell["W_hz"]};
      step.g = hadamard(one_minus_gz, gn);
      break;
    }
    case CellKind::LSTM: {
      Var ui = pre("W_ii", "b_i");
      Var uf = pre("W_if", "b_f");
      Var uo = pre("W_io", "b_o");
      Var uc = pre("W_ic", "b_c");
      Var gi = sigmoid(ui);
      Var gf = sigmoid(uf);
      Var go = sigmoid(uo);
      Var gcm = tanh(uc);
      Var fi = sigmoid_deriv(ui);
      Var fo = sigmoid_deriv(uo);
      Var fcm = tanh_deriv(uc);
      Var gc = hadamard(gi, gcm);
      Var tanh_gc = tanh(gc);
      Var k = hadamard(go, tanh_deriv(gc));
      Var d1 = hadamard(gcm, fi);
      Var d2 = hadamard(gi, fcm);
      Var o = hadamard(fo, tanh_gc);
      step.coef = {gf, d1, d2, k, o};
      step.mats = {cell["W_hi"], cell["W_hc"], cell["W_ho"]};
      step.g = concat(gc, hadamard(go, tanh_gc));
      break;
    }
  }
  return step;
}

LinearStep linearize_token(const MEVars& me, const Var& x) {
  LinearStep step;
  step.provenance = Provenance::ME;
  step.hidden_dim = me.hidden_dim;
  step.coef = {scale(tanh(matmul(me.W, x)), 0.25)};
  step.mats = {me.M};
  step.g = tanh(matmul(me.Wprime, x));
  return step;
}

TokenLinearization linearize_token(const CellParams& cell, const Tensor& x) {
  if (!x.is_vector() || x.size() != cell.input_dim) {
    throw ShapeError("linearize_token: input has shape " + shape_string(x.shape()) + ", expected [" +
                     std::to_string(cell.input_dim) + "]");
  }
  Tape tape;
  const LinearStep step = linearize_token(CellVars::constants(tape, cell), tape.constant(x));
  return {step.matrix().value(), step.g.value()};
}

TokenLinearization linearize_token(const MEParams& me, const Tensor& x) {
  if (!x.is_vector() || x.size() != me.input_dim) {
    throw ShapeError("linearize_token: input has shape " + shape_string(x.shape()) + ", expected [" +
                     std::to_string(me.input_dim) + "]");
  }
  Tape tape;
  const LinearStep step = linearize_token(MEVars::constants(tape, me), tape.constant(x));
  return {step.matrix().value(), step.g.value()};
}

LinearizationReport verify_linearization(const CellParams& cell, const Tensor& x, double step, double tol) {
  LinearizationReport report;
  const TokenLinearization lin = linearize_token(cell, x);
  const std::size_t n = cell.state_dim();

  auto f = [&](const Tensor& stacked) {
    return cell_step(cell, x, CellState::from_stacked(cell, stacked)).stacked();
  };

  const Tensor f0 = f(Tensor::zeros({n}));
  report.max_value_error = max_abs_diff(lin.g, f0);

  std::vector<double> basis(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    basis[j] = step;
    const Tensor up = f(Tensor::vector(basis));
    basis[j] = -step;
    const Tensor down = f(Tensor::vector(basis));
    basis[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fd = (up[i] - down[i]) / (2.0 * step);
      report.max_jacobian_error = std::max(report.max_jacobian_error, std::abs(lin.A(i, j) - fd));
    }
  }
  report.passed = report.max_jacobian_error <= tol && report.max_value_error == 0.0;
  return report;
}

LinearizedCell LinearizedCell::from_cell(CellParams cell, bool learnable) {
  cell.validate();
  LinearizedCell lc;
  lc.provenance_ = provenance_of(cell.kind);
  lc.learnable_ = learnable;
  lc.cell_ = std::move(cell);
  return lc;
}

LinearizedCell LinearizedCell::from_me(MEParams me, bool learnable) {
  me.validate();
  LinearizedCell lc;
  lc.provenance_ = Provenance::ME;
  lc.learnable_ = learnable;
  lc.me_ = std::move(me);
  return lc;
}

std::size_t LinearizedCell::hidden_dim() const { return cell_ ? cell_->hidden_dim : me_->hidden_dim; }

std::size_t LinearizedCell::state_dim() const { return cell_ ? cell_->state_dim() : me_->hidden_dim; }

TokenLinearization LinearizedCell::at(const Tensor& x) const {
  return cell_ ? linearize_token(*cell_, x) : linearize_token(*me_, x);
}

}  // namespace ngram
