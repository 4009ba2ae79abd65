#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ngram/autodiff.hpp"
#include "ngram/cells.hpp"
#include "ngram/linearize.hpp"
#include "ngram/rng.hpp"

namespace ngram {

enum class Arch { Standard, MVMA, MVM, MM, VA_W, VA_EW, MVM_R };

// Row labels such as "MVMA-G", "standard-L", "VA-EW".
struct ModelSpec {
  Arch arch = Arch::MVMA;
  Provenance provenance = Provenance::G;  // Standard, MVMA, MVM
  std::size_t vocab_size = 0;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t window = 5;  // VA-W
  bool has_bias = false;
  Activation activation = Activation::Tanh;  // Elman only

  std::string name() const;
  // Sets arch and provenance from a row label.
  void set_family(const std::string& family);
  void validate() const;
  // Families with token-level A(x), g(x): standard cells (frozen
  // linearization), MVMA and MVM.
  bool exposes_linearization() const;
};

std::vector<std::string> model_family_names();

// Recurrent value carried between LM windows; empty before the first token.
struct Carry {
  Tensor state;
  bool started() const { return !state.empty(); }
};

class Model;

// Model parameters bound to one tape.
struct ModelVars {
  std::map<std::string, Var> own;
  std::optional<CellVars> cell;
  std::optional<MEVars> me;
};

class Model {
 public:
  static Model init(const ModelSpec& spec, Rng& rng);

  const ModelSpec& spec() const { return spec_; }
  // Stable order: encoder-level parameters, then cell parameters.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter& param(const std::string& name);
  const Parameter& param(const std::string& name) const;

  CellParams* cell() { return cell_ ? &*cell_ : nullptr; }
  const CellParams* cell() const { return cell_ ? &*cell_ : nullptr; }
  const MEParams* me() const { return me_ ? &*me_ : nullptr; }

  ModelVars bind(Tape& tape);
  ModelVars bind_constants(Tape& tape) const;

  // Context vectors for positions 1..T. `reset[k]` clears the recurrent
  // state before token k; `carry`, when given, seeds and receives the state.
  std::vector<Var> encode(Tape& tape, const ModelVars& vars, std::span<const std::size_t> ids,
                          Carry* carry = nullptr, const std::vector<bool>& reset = {}) const;

  // Embedding row of a token (the input to A and g).
  Tensor embedding(std::size_t id) const;
  // Token-level linearization used by the interpretation tools.
  LinearizedCell linearization() const;

  std::size_t output_dim() const { return spec_.hidden_dim; }

 private:
  ModelSpec spec_;
  std::map<std::string, Parameter> own_;
  std::optional<CellParams> cell_;
  std::optional<MEParams> me_;
};

enum class HeadKind { Classifier, Regressor, LanguageModel };

std::string to_string(HeadKind kind);

// Output layer without bias: W_out is K x d (K = 1 for regression, V for LM).
struct Head {
  HeadKind kind = HeadKind::Classifier;
  Parameter W_out;

  static Head init(HeadKind kind, std::size_t outputs, std::size_t hidden_dim, Rng& rng);
  std::size_t outputs() const { return W_out.value.rows(); }
  // Decision direction: W_out[1] - W_out[0] for two classes, W_out[0] for
  // regression.
  Tensor polarity_vector() const;
};

// Directory with manifest.txt, vocab.tsv and one .ngrt file per parameter.
struct Checkpoint {
  Model model;
  Head head;
  std::map<std::string, std::string> manifest;
};

void save_checkpoint(const std::filesystem::path& dir, const Model& model, const Head& head,
                     const std::map<std::string, std::string>& extra);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace ngram
