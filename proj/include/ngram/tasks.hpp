#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ngram/autodiff.hpp"
#include "ngram/data.hpp"
#include "ngram/model.hpp"
#include "ngram/rng.hpp"

namespace ngram {

enum class OptimizerKind { SGD, Adagrad, Adam };
enum class ContextMode { Final, Mean };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(ContextMode mode);
ContextMode parse_context_mode(const std::string& name);

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::Adagrad;
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double adagrad_eps = 1e-10;
  double dropout = 0.0;
  double weight_decay = 0.0;
  bool spectral_norm = false;
  std::size_t bptt = 35;
  std::size_t epochs = 20;
  std::size_t batch = 32;
  ContextMode context = ContextMode::Final;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  // Wall-clock seconds in the metrics stream; off keeps metric files
  // byte-identical across reruns.
  bool record_time = false;

  void validate() const;
};

// Decoupled weight decay p <- p - lr * wd * p runs before every update.
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}

  // Parameters without an entry in `grads` are treated as having zero gradient.
  void step(std::span<Parameter* const> params, const Gradients& grads);
  std::size_t steps() const { return t_; }

 private:
  struct Slot {
    Tensor m;
    Tensor v;
  };
  TrainConfig cfg_;
  std::map<const Parameter*, Slot> slots_;
  std::size_t t_ = 0;
};

// Inverted dropout: surviving entries are scaled by 1/(1-rate). Identity when
// `train` is false or rate is zero.
Var dropout(const Var& x, double rate, bool train, Rng& rng);

// Divides W by its top singular value estimated by power iteration on the
// persistent left vector `u` (seeded with the constant vector when empty).
// Iterates until u moves less than `tol`; a warm u usually settles within a
// few steps. Returns the estimate used; a zero matrix is left unchanged.
double spectral_normalize(Tensor& W, Tensor& u, std::size_t max_iters = 1000, double tol = 1e-6);

// Persistent power-iteration vectors for the recurrent matrices of a cell.
class SpectralNorm {
 public:
  void apply(CellParams& cell);

 private:
  std::map<std::string, Tensor> u_;
};

double perplexity(double mean_nll);

struct Example {
  std::vector<std::size_t> ids;
  double label = 0.0;
};

std::vector<Example> encode_examples(const Vocab& vocab, std::span<const LabeledInstance> data);

enum class Mode { Train, Eval };

struct ForwardResult {
  Var loss;             // mean over the batch (tokens for LM)
  double metric = 0.0;  // classify: correct count; regress: sum |err|; lm: summed NLL
  std::size_t count = 0;
};

ForwardResult classification_forward_loss(Tape& tape, Model& model, Head& head, std::span<const Example> batch,
                                          const TrainConfig& cfg, Mode mode, Rng& rng);
ForwardResult regression_forward_loss(Tape& tape, Model& model, Head& head, std::span<const Example> batch,
                                      const TrainConfig& cfg, Mode mode, Rng& rng);
// `carry` holds one entry per stream; values flow across windows, gradients
// do not.
ForwardResult lm_forward_loss(Tape& tape, Model& model, Head& head, const LmWindow& window,
                              std::vector<Carry>& carry, const TrainConfig& cfg, Mode mode, Rng& rng);

struct EpochRecord {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  double metric = 0.0;
  double seconds = 0.0;
};

std::string to_json_line(const EpochRecord& r);

using MetricsSink = std::function<void(const EpochRecord&)>;

// classify: accuracy; regress: MAE; lm: perplexity.
struct EvalResult {
  double loss = 0.0;
  double metric = 0.0;
};

bool higher_is_better(HeadKind kind);

EvalResult evaluate_labeled(Model& model, Head& head, std::span<const Example> data, const TrainConfig& cfg);
EvalResult evaluate_lm(Model& model, Head& head, const EncodedCorpus& corpus, const TrainConfig& cfg);

struct TrainResult {
  std::size_t best_epoch = 0;
  double best_valid_metric = 0.0;
  std::vector<EpochRecord> history;
  bool diverged = false;
  std::string divergence_reason;
};

// Both loops keep the parameters of the best validation epoch. On divergence
// they restore the last good parameters and report it instead of throwing.
TrainResult train_labeled(Model& model, Head& head, std::span<const Example> train, std::span<const Example> valid,
                          const TrainConfig& cfg, const MetricsSink& sink = {});
TrainResult train_lm(Model& model, Head& head, const EncodedCorpus& train, const EncodedCorpus& valid,
                     const TrainConfig& cfg, const MetricsSink& sink = {});

}  // namespace ngram
