#include "ngram/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "ngram/errors.hpp"

namespace ngram {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("value() on unbound Var");
  return tape_->value(id_);
}

const Tensor& Gradients::operator[](const Parameter& p) const {
  auto it = grads_.find(&p);
  if (it == grads_.end()) throw ContractError("no gradient recorded for parameter '" + p.name + "'");
  return it->second;
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Node node;
  node.value = p.value;
  node.requires_grad = true;
  node.param = &p;
  nodes_.push_back(std::move(node));
  bound_[&p] = nodes_.size() - 1;
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::vector<std::size_t> inputs, Forward forward, Backward backward) {
  Node node;
  node.value = forward(*this);
  node.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                   [this](std::size_t id) { return nodes_[id].requires_grad; });
  node.forward = std::move(forward);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.has_grad) {
    node.grad = Tensor::zeros(node.value.shape());
    node.has_grad = true;
  }
  return node.grad;
}

Gradients Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw ContractError("backward: loss was not computed on this tape");
  if (value(loss.id()).size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(value(loss.id()).shape()));
  }
  for (auto& node : nodes_) {
    node.has_grad = false;
    node.grad = Tensor();
  }
  grad(loss.id()).mutable_data()[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.backward) continue;
    // Consumers of a node are recorded after it, so its gradient is final here.
    const Tensor upstream = std::move(node.grad);
    node.has_grad = false;
    node.backward(*this, upstream);
  }
  Gradients out;
  for (auto& [param, id] : bound_) {
    Tensor g = nodes_[id].has_grad ? nodes_[id].grad : Tensor::zeros(nodes_[id].value.shape());
    out.set(*param, std::move(g));
  }
  return out;
}

void Tape::replay() {
  for (auto& node : nodes_) {
    if (node.param) {
      node.value = node.param->value;
    } else if (node.forward) {
      node.value = node.forward(*this);
    }
  }
}

void Tape::clear() {
  nodes_.clear();
  bound_.clear();
}

namespace {

Tape& same_tape(const Var& a) {
  if (!a.valid()) throw ContractError("operation on unbound Var");
  return *a.tape();
}

Tape& same_tape(const Var& a, const Var& b) {
  Tape& t = same_tape(a);
  if (b.tape() != &t) throw ContractError("operands live on different tapes");
  return t;
}

template <typename F>
Var unary_map(const Var& a, F value_fn, std::function<double(double, double)> deriv_fn) {
  Tape& t = same_tape(a);
  const std::size_t ia = a.id();
  return t.record(
      {ia}, [ia, value_fn](const Tape& tp) { return value_fn(tp.value(ia)); },
      [ia, deriv_fn](Tape& tp, const Tensor& g) {
        if (!tp.requires_grad(ia)) return;
        const Tensor& x = tp.value(ia);
        auto out = tp.grad(ia).mutable_data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i] * deriv_fn(x[i], 0.0);
      });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return t.record(
      {ia, ib}, [ia, ib](const Tape& tp) { return matmul(tp.value(ia), tp.value(ib)); },
      [ia, ib](Tape& tp, const Tensor& g) {
        const Tensor& A = tp.value(ia);
        const Tensor& B = tp.value(ib);
        if (B.is_vector()) {
          if (tp.requires_grad(ia)) {
            // dA += g b^T
            auto out = tp.grad(ia).mutable_data();
            const std::size_t m = A.rows();
            const std::size_t k = A.cols();
            for (std::size_t i = 0; i < m; ++i) {
              const double gi = g[i];
              if (gi == 0.0) continue;
              double* row = out.data() + i * k;
              for (std::size_t p = 0; p < k; ++p) row[p] += gi * B[p];
            }
          }
          if (tp.requires_grad(ib)) {
            // dB += A^T g
            auto out = tp.grad(ib).mutable_data();
            const std::size_t m = A.rows();
            const std::size_t k = A.cols();
            const double* pa = A.data().data();
            for (std::size_t i = 0; i < m; ++i) {
              const double gi = g[i];
              if (gi == 0.0) continue;
              for (std::size_t p = 0; p < k; ++p) out[p] += gi * pa[i * k + p];
            }
          }
          return;
        }
        if (tp.requires_grad(ia)) axpy(1.0, matmul_nt(g, B), tp.grad(ia));
        if (tp.requires_grad(ib)) axpy(1.0, matmul_tn(A, g), tp.grad(ib));
      });
}

Var transpose(const Var& a) {
  Tape& t = same_tape(a);
  const std::size_t ia = a.id();
  return t.record(
      {ia}, [ia](const Tape& tp) { return transpose(tp.value(ia)); },
      [ia](Tape& tp, const Tensor& g) { axpy(1.0, transpose(g), tp.grad(ia)); });
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return t.record(
      {ia, ib}, [ia, ib](const Tape& tp) { return add(tp.value(ia), tp.value(ib)); },
      [ia, ib](Tape& tp, const Tensor& g) {
        if (tp.requires_grad(ia)) axpy(1.0, g, tp.grad(ia));
        if (tp.requires_grad(ib)) axpy(1.0, g, tp.grad(ib));
      });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return t.record(
      {ia, ib}, [ia, ib](const Tape& tp) { return sub(tp.value(ia), tp.value(ib)); },
      [ia, ib](Tape& tp, const Tensor& g) {
        if (tp.requires_grad(ia)) axpy(1.0, g, tp.grad(ia));
        if (tp.requires_grad(ib)) axpy(-1.0, g, tp.grad(ib));
      });
}

Var hadamard(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return t.record(
      {ia, ib}, [ia, ib](const Tape& tp) { return hadamard(tp.value(ia), tp.value(ib)); },
      [ia, ib](Tape& tp, const Tensor& g) {
        if (tp.requires_grad(ia)) {
          const Tensor& y = tp.value(ib);
          auto out = tp.grad(ia).mutable_data();
          for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i] * y[i];
        }
        if (tp.requires_grad(ib)) {
          const Tensor& x = tp.value(ia);
          auto out = tp.grad(ib).mutable_data();
          for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i] * x[i];
        }
      });
}

Var scale(const Var& a, double s) { return affine(a, s, 0.0); }

Var affine(const Var& a, double s, double c) {
  Tape& t = same_tape(a);
  const std::size_t ia = a.id();
  return t.record(
      {ia},
      [ia, s, c](const Tape& tp) {
        const Tensor& x = tp.value(ia);
        std::vector<double> out(x.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * x[i] + c;
        return Tensor(x.shape(), std::move(out));
      },
      [ia, s](Tape& tp, const Tensor& g) { axpy(s, g, tp.grad(ia)); });
}

Var sigmoid(const Var& a) {
  return unary_map(
      a, [](const Tensor& x) { return elementwise(ElementwiseKind::Sigmoid, x); },
      [](double u, double) {
        const double s = sigmoid(u);
        return s * (1.0 - s);
      });
}

Var tanh(const Var& a) {
  return unary_map(
      a, [](const Tensor& x) { return elementwise(ElementwiseKind::Tanh, x); },
      [](double u, double) {
        const double t = std::tanh(u);
        return 1.0 - t * t;
      });
}

Var sigmoid_deriv(const Var& a) {
  // d/du [s(1-s)] = s(1-s)(1-2s)
  return unary_map(
      a, [](const Tensor& x) { return elementwise(ElementwiseKind::SigmoidDeriv, x); },
      [](double u, double) {
        const double s = sigmoid(u);
        return s * (1.0 - s) * (1.0 - 2.0 * s);
      });
}

Var tanh_deriv(const Var& a) {
  // d/du [1 - tanh^2] = -2 tanh (1 - tanh^2)
  return unary_map(
      a, [](const Tensor& x) { return elementwise(ElementwiseKind::TanhDeriv, x); },
      [](double u, double) {
        const double t = std::tanh(u);
        return -2.0 * t * (1.0 - t * t);
      });
}

Var elementwise(ElementwiseKind kind, const Var& a) {
  switch (kind) {
    case ElementwiseKind::Sigmoid:
      return sigmoid(a);
    case ElementwiseKind::Tanh:
      return tanh(a);
    case ElementwiseKind::SigmoidDeriv:
      return sigmoid_deriv(a);
    case ElementwiseKind::TanhDeriv:
      return tanh_deriv(a);
    default:
      throw ContractError("binary elementwise kind called with one operand");
  }
}

Var elementwise(ElementwiseKind kind, const Var& a, const Var& b) {
  switch (kind) {
    case ElementwiseKind::Mul:
      return hadamard(a, b);
    case ElementwiseKind::Add:
      return add(a, b);
    case ElementwiseKind::Sub:
      return sub(a, b);
    default:
      throw ContractError("unary elementwise kind called with two operands");
  }
}

Var diag_embed(const Var& v) {
  Tape& t = same_tape(v);
  const std::size_t iv = v.id();
  return t.record(
      {iv}, [iv](const Tape& tp) { return diag_embed(tp.value(iv)); },
      [iv](Tape& tp, const Tensor& g) { axpy(1.0, diagonal(g), tp.grad(iv)); });
}

Var row_scale(const Var& v, const Var& m) {
  Tape& t = same_tape(v, m);
  const std::size_t iv = v.id();
  const std::size_t im = m.id();
  return t.record(
      {iv, im},
      [iv, im](const Tape& tp) {
        const Tensor& s = tp.value(iv);
        const Tensor& M = tp.value(im);
        if (!s.is_vector() || !M.is_matrix() || s.size() != M.rows()) {
          throw ShapeError("row_scale: " + shape_string(s.shape()) + " vs " + shape_string(M.shape()));
        }
        const std::size_t r = M.rows();
        const std::size_t c = M.cols();
        std::vector<double> out(r * c);
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) out[i * c + j] = s[i] * M(i, j);
        }
        return Tensor(M.shape(), std::move(out));
      },
      [iv, im](Tape& tp, const Tensor& g) {
        const Tensor& s = tp.value(iv);
        const Tensor& M = tp.value(im);
        const std::size_t r = M.rows();
        const std::size_t c = M.cols();
        if (tp.requires_grad(iv)) {
          auto out = tp.grad(iv).mutable_data();
          for (std::size_t i = 0; i < r; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j) acc += g(i, j) * M(i, j);
            out[i] += acc;
          }
        }
        if (tp.requires_grad(im)) {
          auto out = tp.grad(im).mutable_data();
          for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) out[i * c + j] += s[i] * g(i, j);
          }
        }
      });
}

Var row(const Var& table, std::size_t index) {
  Tape& t = same_tape(table);
  const std::size_t it = table.id();
  return t.record(
      {it},
      [it, index](const Tape& tp) {
        const Tensor& E = tp.value(it);
        if (!E.is_matrix() || index >= E.rows()) {
          throw ShapeError("row: index " + std::to_string(index) + " out of range for " +
                           shape_string(E.shape()));
        }
        const std::size_t c = E.cols();
        auto d = E.data();
        return Tensor(Shape{c}, std::vector<double>(d.begin() + index * c, d.begin() + (index + 1) * c));
      },
      [it, index](Tape& tp, const Tensor& g) {
        auto out = tp.grad(it).mutable_data();
        const std::size_t c = g.size();
        for (std::size_t j = 0; j < c; ++j) out[index * c + j] += g[j];
      });
}

Var reshape(const Var& a, Shape shape) {
  Tape& t = same_tape(a);
  const std::size_t ia = a.id();
  return t.record(
      {ia},
      [ia, shape](const Tape& tp) {
        const Tensor& x = tp.value(ia);
        return Tensor(shape, x.values());
      },
      [ia](Tape& tp, const Tensor& g) {
        auto out = tp.grad(ia).mutable_data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i];
      });
}

Var concat(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return t.record(
      {ia, ib},
      [ia, ib](const Tape& tp) {
        const Tensor& x = tp.value(ia);
        const Tensor& y = tp.value(ib);
        if (!x.is_vector() || !y.is_vector()) throw ShapeError("concat: expected vectors");
        std::vector<double> out(x.values());
        out.insert(out.end(), y.data().begin(), y.data().end());
        return Tensor::vector(std::move(out));
      },
      [ia, ib](Tape& tp, const Tensor& g) {
        const std::size_t n = tp.value(ia).size();
        if (tp.requires_grad(ia)) {
          auto out = tp.grad(ia).mutable_data();
          for (std::size_t i = 0; i < n; ++i) out[i] += g[i];
        }
        if (tp.requires_grad(ib)) {
          auto out = tp.grad(ib).mutable_data();
          for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[n + i];
        }
      });
}

Var slice(const Var& v, std::size_t offset, std::size_t length) {
  Tape& t = same_tape(v);
  const std::size_t iv = v.id();
  return t.record(
      {iv},
      [iv, offset, length](const Tape& tp) {
        const Tensor& x = tp.value(iv);
        if (!x.is_vector() || offset + length > x.size()) {
          throw ShapeError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                           ") out of range for " + shape_string(x.shape()));
        }
        auto d = x.data();
        return Tensor::vector(std::vector<double>(d.begin() + offset, d.begin() + offset + length));
      },
      [iv, offset](Tape& tp, const Tensor& g) {
        auto out = tp.grad(iv).mutable_data();
        for (std::size_t i = 0; i < g.size(); ++i) out[offset + i] += g[i];
      });
}

Var block2x2(const Var& b, const Var& d, const Var& e, const Var& f) {
  Tape& t = same_tape(b, d);
  same_tape(b, e);
  same_tape(b, f);
  const std::vector<std::size_t> ids{b.id(), d.id(), e.id(), f.id()};
  return t.record(
      ids,
      [ids](const Tape& tp) {
        const std::size_t n = tp.value(ids[0]).rows();
        for (auto id : ids) {
          const Tensor& m = tp.value(id);
          if (!m.is_matrix() || m.rows() != n || m.cols() != n) throw ShapeError("block2x2: blocks must be n x n");
        }
        const std::size_t w = 2 * n;
        std::vector<double> out(w * w);
        for (std::size_t blk = 0; blk < 4; ++blk) {
          const Tensor& m = tp.value(ids[blk]);
          const std::size_t r0 = (blk / 2) * n;
          const std::size_t c0 = (blk % 2) * n;
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) out[(r0 + i) * w + c0 + j] = m(i, j);
          }
        }
        return Tensor(Shape{w, w}, std::move(out));
      },
      [ids](Tape& tp, const Tensor& g) {
        const std::size_t n = tp.value(ids[0]).rows();
        const std::size_t w = 2 * n;
        for (std::size_t blk = 0; blk < 4; ++blk) {
          if (!tp.requires_grad(ids[blk])) continue;
          auto out = tp.grad(ids[blk]).mutable_data();
          const std::size_t r0 = (blk / 2) * n;
          const std::size_t c0 = (blk % 2) * n;
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += g[(r0 + i) * w + c0 + j];
          }
        }
      });
}

Var stack_columns(std::span<const Var> columns) {
  if (columns.empty()) throw ContractError("stack_columns: no columns");
  Tape& t = same_tape(columns[0]);
  std::vector<std::size_t> ids;
  ids.reserve(columns.size());
  for (const auto& c : columns) {
    same_tape(columns[0], c);
    ids.push_back(c.id());
  }
  return t.record(
      ids,
      [ids](const Tape& tp) {
        const std::size_t r = tp.value(ids[0]).size();
        const std::size_t n = ids.size();
        std::vector<double> out(r * n);
        for (std::size_t j = 0; j < n; ++j) {
          const Tensor& col = tp.value(ids[j]);
          if (!col.is_vector() || col.size() != r) throw ShapeError("stack_columns: ragged columns");
          for (std::size_t i = 0; i < r; ++i) out[i * n + j] = col[i];
        }
        return Tensor(Shape{r, n}, std::move(out));
      },
      [ids](Tape& tp, const Tensor& g) {
        const std::size_t n = ids.size();
        for (std::size_t j = 0; j < n; ++j) {
          if (!tp.requires_grad(ids[j])) continue;
          auto out = tp.grad(ids[j]).mutable_data();
          for (std::size_t i = 0; i < out.size(); ++i) out[i] += g[i * n + j];
        }
      });
}

Var sum(const Var& a) {
  Tape& t = same_tape(a);
  const std::size_t ia = a.id();
  return t.record(
      {ia}, [ia](const Tape& tp) { return Tensor::scalar(sum(tp.value(ia))); },
      [ia](Tape& tp, const Tensor& g) {
        const double s = g[0];
        for (double& v : tp.grad(ia).mutable_data()) v += s;
      });
}

Var dot(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return t.record(
      {ia, ib}, [ia, ib](const Tape& tp) { return Tensor::scalar(dot(tp.value(ia), tp.value(ib))); },
      [ia, ib](Tape& tp, const Tensor& g) {
        const double s = g[0];
        if (tp.requires_grad(ia)) axpy(s, tp.value(ib), tp.grad(ia));
        if (tp.requires_grad(ib)) axpy(s, tp.value(ia), tp.grad(ib));
      });
}

Var mean(std::span<const Var> vectors) {
  if (vectors.empty()) throw ContractError("mean: no operands");
  Var acc = vectors[0];
  for (std::size_t i = 1; i < vectors.size(); ++i) acc = add(acc, vectors[i]);
  return scale(acc, 1.0 / static_cast<double>(vectors.size()));
}

namespace {

// Log-softmax of column `col` of an r x n matrix (or of a vector when n == 1).
void log_softmax_column(const Tensor& logits, std::size_t col, std::size_t n, std::vector<double>& out) {
  const std::size_t r = out.size();
  double mx = -INFINITY;
  for (std::size_t i = 0; i < r; ++i) mx = std::max(mx, logits[i * n + col]);
  double z = 0.0;
  for (std::size_t i = 0; i < r; ++i) z += std::exp(logits[i * n + col] - mx);
  const double lz = mx + std::log(z);
  for (std::size_t i = 0; i < r; ++i) out[i] = logits[i * n + col] - lz;
}

}  // namespace

Var softmax_cross_entropy(const Var& logits, std::size_t label) {
  Tape& t = same_tape(logits);
  const std::size_t il = logits.id();
  return t.record(
      {il},
      [il, label](const Tape& tp) {
        const Tensor& z = tp.value(il);
        if (!z.is_vector()) throw ShapeError("softmax_cross_entropy: logits must be a vector");
        if (label >= z.size()) throw DataError("label " + std::to_string(label) + " out of range");
        std::vector<double> lp(z.size());
        log_softmax_column(z, 0, 1, lp);
        return Tensor::scalar(-lp[label]);
      },
      [il, label](Tape& tp, const Tensor& g) {
        const Tensor& z = tp.value(il);
        std::vector<double> lp(z.size());
        log_softmax_column(z, 0, 1, lp);
        auto out = tp.grad(il).mutable_data();
        for (std::size_t i = 0; i < lp.size(); ++i) {
          out[i] += g[0] * (std::exp(lp[i]) - (i == label ? 1.0 : 0.0));
        }
      });
}

Var softmax_cross_entropy_columns(const Var& logits, std::span<const std::size_t> labels) {
  Tape& t = same_tape(logits);
  const std::size_t il = logits.id();
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return t.record(
      {il},
      [il, lab](const Tape& tp) {
        const Tensor& z = tp.value(il);
        if (!z.is_matrix() || z.cols() != lab.size()) {
          throw ShapeError("softmax_cross_entropy_columns: " + shape_string(z.shape()) + " vs " +
                           std::to_string(lab.size()) + " labels");
        }
        const std::size_t r = z.rows();
        const std::size_t n = z.cols();
        std::vector<double> lp(r);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (lab[j] >= r) throw DataError("label " + std::to_string(lab[j]) + " out of range");
          log_softmax_column(z, j, n, lp);
          total -= lp[lab[j]];
        }
        return Tensor::scalar(total / static_cast<double>(n));
      },
      [il, lab](Tape& tp, const Tensor& g) {
        const Tensor& z = tp.value(il);
        const std::size_t r = z.rows();
        const std::size_t n = z.cols();
        const double s = g[0] / static_cast<double>(n);
        std::vector<double> lp(r);
        auto out = tp.grad(il).mutable_data();
        for (std::size_t j = 0; j < n; ++j) {
          log_softmax_column(z, j, n, lp);
          for (std::size_t i = 0; i < r; ++i) {
            out[i * n + j] += s * (std::exp(lp[i]) - (i == lab[j] ? 1.0 : 0.0));
          }
        }
      });
}

double evaluate(const LossFn& loss_fn) {
  Tape tape;
  return loss_fn(tape).value().item();
}

GradCheckResult finite_diff_grad_check(const LossFn& loss_fn, std::span<Parameter* const> params,
                                       double step) {
  if (!(step > 0.0)) throw ContractError("finite_diff_grad_check: step must be positive");
  Tape tape;
  const Var loss = loss_fn(tape);
  const Gradients grads = tape.backward(loss);

  GradCheckResult result;
  for (Parameter* p : params) {
    const Tensor analytic = grads.contains(*p) ? grads[*p] : Tensor::zeros(p->value.shape());
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double original = p->value[i];
      p->value.mutable_data()[i] = original + step;
      const double up = evaluate(loss_fn);
      p->value.mutable_data()[i] = original - step;
      const double down = evaluate(loss_fn);
      p->value.mutable_data()[i] = original;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericalError("finite_diff_grad_check: non-finite loss while perturbing " + p->name);
      }
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
      if (err > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = err;
        result.worst_parameter = p->name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace ngram
