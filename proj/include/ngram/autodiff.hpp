#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ngram/tensor.hpp"

namespace ngram {

// A named trainable tensor. Its value is read when bound to a tape and must
// not change while a forward/backward pass that uses it is in flight.
struct Parameter {
  std::string name;
  Tensor value;
};

class Tape;

// Handle to one node of a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Gradients {
 public:
  const Tensor& operator[](const Parameter& p) const;
  bool contains(const Parameter& p) const { return grads_.count(&p) != 0; }
  std::size_t size() const { return grads_.size(); }
  void set(const Parameter& p, Tensor g) { grads_[&p] = std::move(g); }
  const std::unordered_map<const Parameter*, Tensor>& items() const { return grads_; }

 private:
  std::unordered_map<const Parameter*, Tensor> grads_;
};

// Eager reverse-mode tape. Nodes are appended in execution order, so inputs
// always precede their consumers. A tape and its nodes belong to one thread.
class Tape {
 public:
  using Forward = std::function<Tensor(const Tape&)>;
  using Backward = std::function<void(Tape&, const Tensor& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Repeated binds of the same parameter return the same node.
  Var param(Parameter& p);
  Var record(std::vector<std::size_t> inputs, Forward forward, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of a node, zero-filled on first access.
  Tensor& grad(std::size_t id);

  // Gradients of a scalar loss with respect to every bound parameter.
  Gradients backward(const Var& loss);

  // Recomputes every node from its inputs in tape order. Parameters are
  // re-read from their current values.
  void replay();

  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    Parameter* param = nullptr;
    Forward forward;
    Backward backward;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
};

// Differentiable operations. All operands must live on the same tape.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// s * a + c, entrywise.
Var affine(const Var& a, double s, double c);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var sigmoid_deriv(const Var& a);
Var tanh_deriv(const Var& a);
Var elementwise(ElementwiseKind kind, const Var& a);
Var elementwise(ElementwiseKind kind, const Var& a, const Var& b);
Var diag_embed(const Var& v);
// diag(v) * m without forming the diagonal matrix.
Var row_scale(const Var& v, const Var& m);
// Row `index` of a matrix as a vector (embedding lookup).
Var row(const Var& table, std::size_t index);
Var reshape(const Var& a, Shape shape);
Var concat(const Var& a, const Var& b);
Var slice(const Var& v, std::size_t offset, std::size_t length);
// [[b, d], [e, f]] from four equally sized square blocks.
Var block2x2(const Var& b, const Var& d, const Var& e, const Var& f);
Var stack_columns(std::span<const Var> columns);
Var sum(const Var& a);
Var dot(const Var& a, const Var& b);
Var mean(std::span<const Var> vectors);
// Mean negative log-likelihood of `label` under softmax(logits).
Var softmax_cross_entropy(const Var& logits, std::size_t label);
// Column-wise softmax cross-entropy averaged over columns.
Var softmax_cross_entropy_columns(const Var& logits, std::span<const std::size_t> labels);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }

// Runs `loss_fn` on a fresh tape and returns its scalar value.
using LossFn = std::function<Var(Tape&)>;
double evaluate(const LossFn& loss_fn);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central-difference check of backward() for every coordinate of `params`.
// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-3).
GradCheckResult finite_diff_grad_check(const LossFn& loss_fn, std::span<Parameter* const> params,
                                       double step);

}  // namespace ngram
