#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ngram/autodiff.hpp"
#include "ngram/rng.hpp"
#include "ngram/tensor.hpp"

namespace ngram {

enum class CellKind { Elman, GRU, LSTM };

// Identity is only meaningful for Elman: it turns the cell into an affine map
// of the previous state, which makes the first-order expansion exact.
enum class Activation { Tanh, Identity };

std::string to_string(CellKind kind);
CellKind parse_cell_kind(const std::string& name);

// Weights of one standard recurrent cell. Input matrices W_i* are d x dx,
// recurrent matrices W_h* are d x d. Bias vectors b_* exist only when
// `has_bias` is set and are added inside each pre-activation.
struct CellParams {
  CellKind kind = CellKind::GRU;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  bool has_bias = false;
  Activation activation = Activation::Tanh;
  std::map<std::string, Parameter> weights;

  // Uniform(-1/sqrt(d), 1/sqrt(d)) for every matrix; biases start at zero.
  static CellParams init(CellKind kind, std::size_t input_dim, std::size_t hidden_dim, Rng& rng,
                         bool with_bias = false);
  static std::vector<std::string> input_weight_names(CellKind kind);
  static std::vector<std::string> recurrent_weight_names(CellKind kind);
  static std::vector<std::string> bias_names(CellKind kind);

  const Tensor& W(const std::string& name) const;
  Parameter& param(const std::string& name);
  std::vector<Parameter*> parameters();

  // Size of the recurrent state: d, or 2d for the LSTM (c, h) pair.
  std::size_t state_dim() const { return kind == CellKind::LSTM ? 2 * hidden_dim : hidden_dim; }
  void validate() const;
};

struct CellState {
  Tensor h;
  std::optional<Tensor> c;  // LSTM only

  static CellState zero(const CellParams& params);
  // (c, h) for the LSTM, h otherwise.
  Tensor stacked() const;
  static CellState from_stacked(const CellParams& params, const Tensor& stacked);
};

CellState cell_step(const CellParams& params, const Tensor& x, const CellState& state);

// states[t] = cell_step(params, x_t, states[t-1]); starts from the zero state
// unless `init` is given.
std::vector<CellState> run_sequence(const CellParams& params, std::span<const Tensor> embeddings,
                                    const std::optional<CellState>& init = std::nullopt);

// Cell weights bound to a tape, either as trainable parameters or constants.
struct CellVars {
  CellKind kind = CellKind::GRU;
  Activation activation = Activation::Tanh;
  std::size_t hidden_dim = 0;
  bool has_bias = false;
  std::map<std::string, Var> w;

  static CellVars bind(Tape& tape, CellParams& params);
  static CellVars constants(Tape& tape, const CellParams& params);
  const Var& operator[](const std::string& name) const;
};

struct CellStateVar {
  Var h;
  Var c;  // unbound unless LSTM
};

CellStateVar cell_step(const CellVars& cell, const Var& x, const CellStateVar& state);
CellStateVar zero_state(Tape& tape, const CellVars& cell);

}  // namespace ngram
