#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ngram/autodiff.hpp"
#include "ngram/cells.hpp"
#include "ngram/rng.hpp"
#include "ngram/tensor.hpp"

namespace ngram {

// Which parameterization produced A(x) and g(x).
enum class Provenance { E, G, L, ME };

std::string to_string(Provenance p);
Provenance provenance_of(CellKind kind);

// A(x) = 0.25 diag[tanh(W x)] M + 0.5 I,  g(x) = tanh(W' x).
struct MEParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::map<std::string, Parameter> weights;  // "W", "M", "Wprime"

  static MEParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  const Tensor& W(const std::string& name) const;
  Parameter& param(const std::string& name);
  std::vector<Parameter*> parameters();
  void validate() const;
};

struct MEVars {
  std::size_t hidden_dim = 0;
  Var W, M, Wprime;

  static MEVars bind(Tape& tape, MEParams& params);
  static MEVars constants(Tape& tape, const MEParams& params);
};

struct TokenLinearization {
  Tensor A;
  Tensor g;
};

// Differentiable linearization of one token. A(x) is kept factored as
// diagonal scalings of the recurrent matrices so that A(x) h costs a few
// matrix-vector products; matrix() materializes it.
struct LinearStep {
  Provenance provenance = Provenance::G;
  std::size_t hidden_dim = 0;
  Var g;
  std::vector<Var> coef;  // diagonal coefficient vectors, kind specific
  std::vector<Var> mats;  // recurrent matrices the coefficients scale

  std::size_t state_dim() const { return provenance == Provenance::L ? 2 * hidden_dim : hidden_dim; }
  Var apply(const Var& state) const;
  Var matrix() const;
};

LinearStep linearize_token(const CellVars& cell, const Var& x);
LinearStep linearize_token(const MEVars& me, const Var& x);

TokenLinearization linearize_token(const CellParams& cell, const Tensor& x);
TokenLinearization linearize_token(const MEParams& me, const Tensor& x);

struct LinearizationReport {
  double max_jacobian_error = 0.0;  // max |A - J_fd|
  double max_value_error = 0.0;     // max |g - f(x, 0)|
  bool passed = false;
};

// Compares A against central differences of cell_step around the zero state
// (the stacked (c, h) state for the LSTM) and g against cell_step(x, 0).
// Failures are reported, never thrown.
LinearizationReport verify_linearization(const CellParams& cell, const Tensor& x, double step, double tol);

// Token-indexed A/g functions with their provenance. Frozen cells come from a
// trained standard cell; learnable ones are trained directly.
class LinearizedCell {
 public:
  static LinearizedCell from_cell(CellParams cell, bool learnable = false);
  static LinearizedCell from_me(MEParams me, bool learnable = true);

  Provenance provenance() const { return provenance_; }
  bool learnable() const { return learnable_; }
  std::size_t hidden_dim() const;
  // d, or 2d for the LSTM extended state.
  std::size_t state_dim() const;
  // Offset of the block used downstream (the h block for the LSTM).
  std::size_t output_offset() const { return provenance_ == Provenance::L ? hidden_dim() : 0; }

  TokenLinearization at(const Tensor& x) const;
  const CellParams* cell() const { return cell_ ? &*cell_ : nullptr; }
  const MEParams* me() const { return me_ ? &*me_ : nullptr; }

 private:
  Provenance provenance_ = Provenance::G;
  bool learnable_ = false;
  std::optional<CellParams> cell_;
  std::optional<MEParams> me_;
};

}  // namespace ngram
