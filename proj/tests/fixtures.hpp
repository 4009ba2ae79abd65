#pragma once

// Shared builders for tests: random token maps from each provenance and
// small random models.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ngram/cells.hpp"
#include "ngram/compose.hpp"
#include "ngram/linearize.hpp"
#include "ngram/model.hpp"
#include "oracles.hpp"

namespace fixture {

inline const ngram::Provenance kProvenances[] = {ngram::Provenance::E, ngram::Provenance::G, ngram::Provenance::L,
                                                 ngram::Provenance::ME};

inline ngram::LinearizedCell random_linearized(ngram::Provenance p, std::size_t dx, std::size_t d, ngram::Rng& rng) {
  using namespace ngram;
  switch (p) {
    case Provenance::E:
      return LinearizedCell::from_cell(CellParams::init(CellKind::Elman, dx, d, rng));
    case Provenance::G:
      return LinearizedCell::from_cell(CellParams::init(CellKind::GRU, dx, d, rng));
    case Provenance::L:
      return LinearizedCell::from_cell(CellParams::init(CellKind::LSTM, dx, d, rng));
    case Provenance::ME:
      return LinearizedCell::from_me(MEParams::init(dx, d, rng));
  }
  return LinearizedCell::from_cell(CellParams::init(CellKind::GRU, dx, d, rng));
}

// A(x_t), g(x_t) for T random embeddings.
inline ngram::TokenMaps random_maps(const ngram::LinearizedCell& lin, std::size_t dx, std::size_t T, ngram::Rng& rng) {
  ngram::TokenMaps maps;
  for (std::size_t t = 0; t < T; ++t) {
    const auto step = lin.at(oracle::random_tensor({dx}, rng));
    maps.A.push_back(step.A);
    maps.g.push_back(step.g);
  }
  return maps;
}

// Unstructured random maps; `scale` keeps products bounded.
inline ngram::TokenMaps random_maps(std::size_t d, std::size_t T, ngram::Rng& rng, double scale = 0.5) {
  ngram::TokenMaps maps;
  for (std::size_t t = 0; t < T; ++t) {
    maps.A.push_back(oracle::random_tensor({d, d}, rng, scale / std::sqrt(static_cast<double>(d))));
    maps.g.push_back(oracle::random_tensor({d}, rng));
  }
  return maps;
}

inline ngram::ModelSpec spec_for(const std::string& family, std::size_t V, std::size_t dx, std::size_t d) {
  ngram::ModelSpec s;
  s.set_family(family);
  s.vocab_size = V;
  s.input_dim = dx;
  s.hidden_dim = d;
  s.window = 3;
  return s;
}

}  // namespace fixture


namespace fixture {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ngram_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture

#include "ngram/tasks.hpp"

namespace fixture {

// Max relative gradient error of one family/head pair on a tiny random
// problem (d <= 4, T <= 6). Dropout is active with a replayed mask stream.
inline ngram::GradCheckResult grad_check_pair(const std::string& family, ngram::HeadKind head_kind,
                                              std::uint64_t seed, std::size_t d = 3) {
  using namespace ngram;
  Rng rng(seed);
  const std::size_t V = 7;
  Model model = Model::init(spec_for(family, V, 3, d), rng);
  // Move the random init away from symmetric points.
  for (Parameter* p : model.parameters())
    for (double& v : p->value.mutable_data()) v += 0.1 * rng.normal();
  const std::size_t outputs = head_kind == HeadKind::Classifier ? 3 : head_kind == HeadKind::Regressor ? 1 : V;
  Head head = Head::init(head_kind, outputs, d, rng);
  TrainConfig cfg;
  cfg.dropout = 0.25;
  cfg.bptt = 6;

  std::vector<Parameter*> params = model.parameters();
  params.push_back(&head.W_out);
  const Rng drop_stream = rng.fork();

  if (head_kind == HeadKind::LanguageModel) {
    LmWindow win;
    for (std::size_t s = 0; s < 2; ++s) {
      win.inputs.emplace_back();
      win.targets.emplace_back();
      win.reset.emplace_back();
      for (std::size_t k = 0; k < 5; ++k) {
        win.inputs[s].push_back(rng.below(V));
        win.targets[s].push_back(rng.below(V));
        win.reset[s].push_back(k == 2 && s == 1);
      }
    }
    // A nonzero carried state exercises the detached-carry path.
    std::vector<Carry> carry0(2);
    {
      Tape tape;
      Rng r(1);
      lm_forward_loss(tape, model, head, win, carry0, cfg, Mode::Eval, r);
    }
    return finite_diff_grad_check(
        [&](Tape& tape) {
          std::vector<Carry> carry = carry0;
          Rng r = drop_stream;
          return lm_forward_loss(tape, model, head, win, carry, cfg, Mode::Train, r).loss;
        },
        params, 1e-4);
  }

  std::vector<Example> batch;
  for (std::size_t e = 0; e < 3; ++e) {
    Example ex;
    const std::size_t T = 1 + rng.below(6);
    for (std::size_t k = 0; k < T; ++k) ex.ids.push_back(rng.below(V));
    ex.label = head_kind == HeadKind::Classifier ? static_cast<double>(e % 3) : rng.normal();
    batch.push_back(ex);
  }
  for (ContextMode mode : {ContextMode::Final, ContextMode::Mean}) {
    cfg.context = mode;
    auto r = finite_diff_grad_check(
        [&](Tape& tape) {
          Rng dr = drop_stream;
          return head_kind == HeadKind::Classifier
                     ? classification_forward_loss(tape, model, head, batch, cfg, Mode::Train, dr).loss
                     : regression_forward_loss(tape, model, head, batch, cfg, Mode::Train, dr).loss;
        },
        params, 1e-4);
    if (mode == ContextMode::Mean) return r;
    if (r.max_relative_error > 1e-4) return r;
  }
  return {};
}

inline bool supports_lm(const std::string& family) { return family != "VA-W" && family != "MVM-R"; }

}  // namespace fixture
