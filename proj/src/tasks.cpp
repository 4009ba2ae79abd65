#include "ngram/tasks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "json.hpp"
#include "ngram/errors.hpp"

namespace ngram {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::SGD:
      return "sgd";
    case OptimizerKind::Adagrad:
      return "adagrad";
    case OptimizerKind::Adam:
      return "adam";
  }
  return "?";
}

OptimizerKind parse_optimizer(const std::string& name) {
  for (OptimizerKind k : {OptimizerKind::SGD, OptimizerKind::Adagrad, OptimizerKind::Adam}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("optimizer: unknown value '" + name + "' (sgd, adagrad, adam)");
}

std::string to_string(ContextMode mode) { return mode == ContextMode::Final ? "final" : "mean"; }

ContextMode parse_context_mode(const std::string& name) {
  if (name == "final") return ContextMode::Final;
  if (name == "mean") return ContextMode::Mean;
  throw ConfigError("context: unknown value '" + name + "' (final, mean)");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(weight_decay >= 0.0 && weight_decay < 1.0)) throw ConfigError("weight_decay must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (bptt < 1) throw ConfigError("bptt must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

void Optimizer::step(std::span<Parameter* const> params, const Gradients& grads) {
  ++t_;
  const double lr = cfg_.lr;
  const double decay = lr * cfg_.weight_decay;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Parameter* p : params) {
    const Tensor* g = grads.contains(*p) ? &grads[*p] : nullptr;
    if (g && !g->same_shape(p->value)) throw ShapeError("gradient shape mismatch for " + p->name);
    auto w = p->value.mutable_data();
    if (decay > 0.0) {
      for (double& x : w) x -= decay * x;
    }
    Slot& slot = slots_[p];
    switch (cfg_.optimizer) {
      case OptimizerKind::SGD:
        if (g) {
          for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * (*g)[i];
        }
        break;
      case OptimizerKind::Adagrad: {
        if (slot.v.empty()) slot.v = Tensor::zeros(p->value.shape());
        auto v = slot.v.mutable_data();
        if (!g) break;
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double gi = (*g)[i];
          v[i] += gi * gi;
          w[i] -= lr * gi / (std::sqrt(v[i]) + cfg_.adagrad_eps);
        }
        break;
      }
      case OptimizerKind::Adam: {
        if (slot.m.empty()) {
          slot.m = Tensor::zeros(p->value.shape());
          slot.v = Tensor::zeros(p->value.shape());
        }
        auto m = slot.m.mutable_data();
        auto v = slot.v.mutable_data();
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double gi = g ? (*g)[i] : 0.0;
          m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
          v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
          w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.adam_eps);
        }
        break;
      }
    }
    p->value.check_finite();
  }
}

Var dropout(const Var& x, double rate, bool train, Rng& rng) {
  if (!train || rate == 0.0) return x;
  if (!(rate > 0.0 && rate < 1.0)) throw ContractError("dropout rate must lie in [0, 1)");
  Tensor mask(x.value().shape());
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask.mutable_data()) m = rng.bernoulli(rate) ? 0.0 : keep;
  return hadamard(x, x.tape()->constant(std::move(mask)));
}

double spectral_normalize(Tensor& W, Tensor& u, std::size_t max_iters, double tol) {
  if (!W.is_matrix()) throw ShapeError("spectral_normalize expects a matrix");
  if (max_abs(W) == 0.0) return 0.0;
  const std::size_t m = W.rows();
  if (u.size() != m) {
    // Cold start: the persistent vector has not seen this matrix yet.
    u = Tensor::filled({m}, 1.0 / std::sqrt(static_cast<double>(m)));
    if (norm2(matmul_tn(W, u)) == 0.0) {
      for (std::size_t k = 0; k < m; ++k) {
        Tensor e({m});
        e.mutable_data()[k] = 1.0;
        if (norm2(matmul_tn(W, e)) > 0.0) {
          u = std::move(e);
          break;
        }
      }
    }
  }
  double sigma = 0.0;
  for (std::size_t k = 0; k < max_iters; ++k) {
    Tensor v = matmul_tn(W, u);
    const double nv = norm2(v);
    if (nv == 0.0) break;
    v = scale(v, 1.0 / nv);
    Tensor next = matmul(W, v);
    sigma = norm2(next);
    next = scale(next, 1.0 / sigma);
    const double delta = max_abs_diff(next, u);
    u = std::move(next);
    if (delta <= tol) break;
  }
  if (sigma == 0.0) return 0.0;
  W = scale(W, 1.0 / sigma);
  return sigma;
}

void SpectralNorm::apply(CellParams& cell) {
  for (const auto& name : CellParams::recurrent_weight_names(cell.kind)) {
    spectral_normalize(cell.param(name).value, u_[name]);
  }
}

double perplexity(double mean_nll) {
  if (!std::isfinite(mean_nll)) throw NumericalError("perplexity of a non-finite mean NLL");
  return std::exp(mean_nll);
}

std::vector<Example> encode_examples(const Vocab& vocab, std::span<const LabeledInstance> data) {
  std::vector<Example> out;
  out.reserve(data.size());
  for (const auto& inst : data) out.push_back({vocab.encode(inst.tokens), inst.label});
  return out;
}

namespace {

// One context vector per example, with dropout applied in training mode.
Var batch_contexts(Tape& tape, Model& model, std::span<const Example> batch, const TrainConfig& cfg, Mode mode,
                   Rng& rng) {
  if (batch.empty()) throw ContractError("empty batch");
  const ModelVars vars = model.bind(tape);
  std::vector<Var> cols;
  cols.reserve(batch.size());
  for (const auto& ex : batch) {
    std::vector<Var> outs = model.encode(tape, vars, ex.ids);
    Var ctx = cfg.context == ContextMode::Mean ? mean(outs) : outs.back();
    cols.push_back(dropout(ctx, cfg.dropout, mode == Mode::Train, rng));
  }
  return stack_columns(cols);
}

std::size_t class_label(double label, std::size_t K) {
  if (!(label >= 0.0) || label != std::floor(label) || label >= static_cast<double>(K)) {
    throw DataError("class label " + std::to_string(label) + " outside [0, " + std::to_string(K) + ")");
  }
  return static_cast<std::size_t>(label);
}

}  // namespace

ForwardResult classification_forward_loss(Tape& tape, Model& model, Head& head, std::span<const Example> batch,
                                          const TrainConfig& cfg, Mode mode, Rng& rng) {
  const std::size_t K = head.outputs();
  std::vector<std::size_t> labels;
  labels.reserve(batch.size());
  for (const auto& ex : batch) labels.push_back(class_label(ex.label, K));

  Var H = batch_contexts(tape, model, batch, cfg, mode, rng);
  Var logits = matmul(tape.param(head.W_out), H);
  ForwardResult r;
  r.loss = softmax_cross_entropy_columns(logits, labels);
  r.count = batch.size();
  const Tensor& L = logits.value();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k) {
      if (L(k, b) > L(best, b)) best = k;
    }
    r.metric += best == labels[b] ? 1.0 : 0.0;
  }
  return r;
}

ForwardResult regression_forward_loss(Tape& tape, Model& model, Head& head, std::span<const Example> batch,
                                      const TrainConfig& cfg, Mode mode, Rng& rng) {
  if (head.outputs() != 1) throw ContractError("regression needs a single-output head");
  std::vector<double> targets;
  targets.reserve(batch.size());
  for (const auto& ex : batch) targets.push_back(ex.label);

  Var H = batch_contexts(tape, model, batch, cfg, mode, rng);
  Var pred = matmul(tape.param(head.W_out), H);
  Var diff = pred - tape.constant(Tensor::matrix(1, batch.size(), targets));
  ForwardResult r;
  r.loss = scale(sum(hadamard(diff, diff)), 1.0 / static_cast<double>(batch.size()));
  r.count = batch.size();
  for (double e : diff.value().data()) r.metric += std::abs(e);
  return r;
}

ForwardResult lm_forward_loss(Tape& tape, Model& model, Head& head, const LmWindow& window,
                              std::vector<Carry>& carry, const TrainConfig& cfg, Mode mode, Rng& rng) {
  const std::size_t streams = window.inputs.size();
  if (streams == 0) throw ContractError("empty LM window");
  if (carry.size() != streams) carry.resize(streams);
  const std::size_t V = head.outputs();

  const ModelVars vars = model.bind(tape);
  std::vector<Var> cols;
  std::vector<std::size_t> targets;
  for (std::size_t s = 0; s < streams; ++s) {
    if (window.inputs[s].size() > cfg.bptt) throw ContractError("LM window longer than bptt");
    if (window.targets[s].size() != window.inputs[s].size()) throw ContractError("LM targets misaligned");
    for (std::size_t t : window.targets[s]) {
      if (t >= V) throw DataError("target index " + std::to_string(t) + " outside vocabulary of " + std::to_string(V));
    }
    std::vector<Var> outs = model.encode(tape, vars, window.inputs[s], &carry[s], window.reset[s]);
    for (auto& o : outs) cols.push_back(dropout(o, cfg.dropout, mode == Mode::Train, rng));
    targets.insert(targets.end(), window.targets[s].begin(), window.targets[s].end());
  }
  Var logits = matmul(tape.param(head.W_out), stack_columns(cols));
  ForwardResult r;
  r.loss = softmax_cross_entropy_columns(logits, targets);
  r.count = targets.size();
  r.metric = r.loss.value().item() * static_cast<double>(r.count);
  return r;
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["split"] = r.split;
  j["loss"] = r.loss;
  j["metric"] = r.metric;
  j["seconds"] = r.seconds;
  return j.dump();
}

bool higher_is_better(HeadKind kind) { return kind == HeadKind::Classifier; }

namespace {

ForwardResult labeled_forward(Tape& tape, Model& model, Head& head, std::span<const Example> batch,
                              const TrainConfig& cfg, Mode mode, Rng& rng) {
  switch (head.kind) {
    case HeadKind::Classifier:
      return classification_forward_loss(tape, model, head, batch, cfg, mode, rng);
    case HeadKind::Regressor:
      return regression_forward_loss(tape, model, head, batch, cfg, mode, rng);
    case HeadKind::LanguageModel:
      break;
  }
  throw ContractError("labeled data needs a classifier or regressor head");
}

std::vector<Parameter*> all_parameters(Model& model, Head& head) {
  std::vector<Parameter*> params = model.parameters();
  params.push_back(&head.W_out);
  return params;
}

std::vector<Tensor> snapshot(std::span<Parameter* const> params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

void restore(std::span<Parameter* const> params, const std::vector<Tensor>& values) {
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = values[k];
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

EvalResult evaluate_labeled(Model& model, Head& head, std::span<const Example> data, const TrainConfig& cfg) {
  if (data.empty()) throw ContractError("evaluation set is empty");
  const std::size_t chunks = (data.size() + cfg.batch - 1) / cfg.batch;
  std::vector<double> loss(chunks), metric(chunks);
  auto run = [&](std::size_t c) {
    const std::size_t lo = c * cfg.batch;
    const auto part = data.subspan(lo, std::min(cfg.batch, data.size() - lo));
    Tape tape;
    Rng rng(0);
    const ForwardResult r = labeled_forward(tape, model, head, part, cfg, Mode::Eval, rng);
    loss[c] = r.loss.value().item() * static_cast<double>(r.count);
    metric[c] = r.metric;
  };
  const std::size_t workers = std::min(cfg.threads, chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t c = w; c < chunks; c += workers) run(c);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  // Summed in chunk order so the result does not depend on the thread count.
  const double n = static_cast<double>(data.size());
  EvalResult out;
  out.loss = std::accumulate(loss.begin(), loss.end(), 0.0) / n;
  out.metric = std::accumulate(metric.begin(), metric.end(), 0.0) / n;
  return out;
}

EvalResult evaluate_lm(Model& model, Head& head, const EncodedCorpus& corpus, const TrainConfig& cfg) {
  const std::vector<LmWindow> windows = batchify_lm(corpus, 1, cfg.bptt);
  std::vector<Carry> carry(1);
  Rng rng(0);
  double nll = 0.0;
  std::size_t count = 0;
  for (const auto& w : windows) {
    Tape tape;
    const ForwardResult r = lm_forward_loss(tape, model, head, w, carry, cfg, Mode::Eval, rng);
    nll += r.metric;
    count += r.count;
  }
  EvalResult out;
  out.loss = nll / static_cast<double>(count);
  out.metric = perplexity(out.loss);
  return out;
}

TrainResult train_labeled(Model& model, Head& head, std::span<const Example> train, std::span<const Example> valid,
                          const TrainConfig& cfg, const MetricsSink& sink) {
  cfg.validate();
  if (train.empty()) throw ContractError("training set is empty");
  const bool maximize = higher_is_better(head.kind);
  std::vector<Parameter*> params = all_parameters(model, head);
  std::vector<Tensor> best = snapshot(params);
  Optimizer opt(cfg);
  SpectralNorm sn;
  const bool use_sn = cfg.spectral_norm && model.spec().arch == Arch::Standard;
  Rng rng(cfg.seed);

  TrainResult result;
  result.best_valid_metric = maximize ? -std::numeric_limits<double>::infinity()
                                      : std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  auto emit = [&](EpochRecord rec) {
    result.history.push_back(rec);
    if (sink) sink(rec);
  };

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);

    double loss_sum = 0.0, metric_sum = 0.0;
    try {
      std::vector<Example> batch;
      for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch) {
        batch.clear();
        for (std::size_t k = lo; k < std::min(order.size(), lo + cfg.batch); ++k) batch.push_back(train[order[k]]);
        if (use_sn) sn.apply(*model.cell());
        Tape tape;
        const ForwardResult r = labeled_forward(tape, model, head, batch, cfg, Mode::Train, rng);
        loss_sum += r.loss.value().item() * static_cast<double>(r.count);
        metric_sum += r.metric;
        opt.step(params, tape.backward(r.loss));
      }
    } catch (const NumericalError& e) {
      restore(params, best);
      result.diverged = true;
      result.divergence_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
      return result;
    }
    const double n = static_cast<double>(train.size());
    const double train_seconds = cfg.record_time ? seconds_since(start) : 0.0;
    emit({epoch, "train", loss_sum / n, metric_sum / n, train_seconds});

    const bool have_valid = !valid.empty();
    const EvalResult v = have_valid ? evaluate_labeled(model, head, valid, cfg) : EvalResult{loss_sum / n, metric_sum / n};
    if (have_valid) emit({epoch, "valid", v.loss, v.metric, cfg.record_time ? seconds_since(start) : 0.0});
    const bool better = maximize ? v.metric > result.best_valid_metric : v.metric < result.best_valid_metric;
    if (better || !have_valid) {
      result.best_valid_metric = v.metric;
      result.best_epoch = epoch;
      best = snapshot(params);
    }
  }
  restore(params, best);
  return result;
}

TrainResult train_lm(Model& model, Head& head, const EncodedCorpus& train, const EncodedCorpus& valid,
                     const TrainConfig& cfg, const MetricsSink& sink) {
  cfg.validate();
  if (head.kind != HeadKind::LanguageModel) throw ContractError("language modeling needs an lm head");
  const std::vector<LmWindow> windows = batchify_lm(train, cfg.batch, cfg.bptt);
  std::vector<Parameter*> params = all_parameters(model, head);
  std::vector<Tensor> best = snapshot(params);
  Optimizer opt(cfg);
  SpectralNorm sn;
  const bool use_sn = cfg.spectral_norm && model.spec().arch == Arch::Standard;
  Rng rng(cfg.seed);

  TrainResult result;
  result.best_valid_metric = std::numeric_limits<double>::infinity();
  auto emit = [&](EpochRecord rec) {
    result.history.push_back(rec);
    if (sink) sink(rec);
  };
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<Carry> carry(cfg.batch);
    double nll = 0.0;
    std::size_t count = 0;
    try {
      for (const auto& w : windows) {
        if (use_sn) sn.apply(*model.cell());
        Tape tape;
        const ForwardResult r = lm_forward_loss(tape, model, head, w, carry, cfg, Mode::Train, rng);
        nll += r.metric;
        count += r.count;
        opt.step(params, tape.backward(r.loss));
      }
    } catch (const NumericalError& e) {
      restore(params, best);
      result.diverged = true;
      result.divergence_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
      return result;
    }
    const double mean_nll = nll / static_cast<double>(count);
    emit({epoch, "train", mean_nll, perplexity(mean_nll), cfg.record_time ? seconds_since(start) : 0.0});
    const EvalResult v = evaluate_lm(model, head, valid, cfg);
    emit({epoch, "valid", v.loss, v.metric, cfg.record_time ? seconds_since(start) : 0.0});
    if (v.metric < result.best_valid_metric) {
      result.best_valid_metric = v.metric;
      result.best_epoch = epoch;
      best = snapshot(params);
    }
  }
  restore(params, best);
  return result;
}

}  // namespace ngram
