#include "ngram/compose.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "ngram/errors.hpp"

namespace ngram {

std::string to_string(Family f) {
  switch (f) {
    case Family::VM:
      return "VM";
    case Family::MM:
      return "MM";
    case Family::VA_W:
      return "VA-W";
    case Family::VA_EW:
      return "VA-EW";
    case Family::MVM_R:
      return "MVM-R";
    case Family::MVM:
      return "MVM";
    case Family::MVMA:
      return "MVMA";
  }
  return "?";
}

Family parse_family(const std::string& name) {
  for (Family f : {Family::VM, Family::MM, Family::VA_W, Family::VA_EW, Family::MVM_R, Family::MVM,
                   Family::MVMA}) {
    if (to_string(f) == name) return f;
  }
  throw ConfigError("unknown composer family '" + name + "'");
}

void Composer::validate() const {
  switch (family) {
    case Family::VA_W:
      if (window < 1) throw ContractError("VA-W needs a window m >= 1");
      if (C.size() != window) {
        throw ContractError("VA-W needs " + std::to_string(window) + " position matrices, got " +
                            std::to_string(C.size()));
      }
      break;
    case Family::VA_EW:
      if (C.size() != 1) throw ContractError("VA-EW needs exactly one matrix C");
      break;
    default:
      break;
  }
}

namespace {

void check_span(const TokenMaps& tokens, std::size_t i, std::size_t j) {
  const std::size_t T = tokens.length();
  if (i < 1 || i > j || j > T) {
    throw ContractError("span (" + std::to_string(i) + ", " + std::to_string(j) + ") outside 1.." +
                        std::to_string(T));
  }
}

const Tensor& A_at(const TokenMaps& tokens, std::size_t pos) {
  if (pos - 1 >= tokens.A.size()) throw ContractError("composer needs A(x) for position " + std::to_string(pos));
  return tokens.A[pos - 1];
}

const Tensor& g_at(const TokenMaps& tokens, std::size_t pos) {
  if (pos - 1 >= tokens.g.size()) throw ContractError("composer needs g(x) for position " + std::to_string(pos));
  return tokens.g[pos - 1];
}

// A(x_j) ... A(x_{i+1}) g(x_i)
Tensor multiplicative(const TokenMaps& tokens, std::size_t i, std::size_t j) {
  Tensor v = g_at(tokens, i);
  for (std::size_t k = i + 1; k <= j; ++k) v = matmul(A_at(tokens, k), v);
  return v;
}

}  // namespace

NgramRep ngram_rep(const Composer& c, const TokenMaps& tokens, std::size_t i, std::size_t j) {
  c.validate();
  check_span(tokens, i, j);
  NgramRep rep{i, j, {}};
  switch (c.family) {
    case Family::VM: {
      Tensor v = g_at(tokens, i);
      for (std::size_t k = i + 1; k <= j; ++k) v = hadamard(v, g_at(tokens, k));
      rep.payload = std::move(v);
      break;
    }
    case Family::MM: {
      Tensor m = A_at(tokens, i);
      for (std::size_t k = i + 1; k <= j; ++k) m = matmul(A_at(tokens, k), m);
      rep.payload = std::move(m);
      break;
    }
    case Family::VA_W: {
      if (j - i >= c.window) {
        throw WindowError("VA-W span length " + std::to_string(j - i + 1) + " exceeds window " +
                          std::to_string(c.window));
      }
      rep.payload = matmul(c.C[j - i], g_at(tokens, i));
      break;
    }
    case Family::VA_EW: {
      Tensor v = g_at(tokens, i);
      for (std::size_t k = i; k < j; ++k) v = matmul(c.C[0], v);
      rep.payload = std::move(v);
      break;
    }
    case Family::MVM_R: {
      if (j == i) {
        rep.payload = g_at(tokens, i);
      } else if (j == i + 1) {
        rep.payload = matmul(A_at(tokens, i), g_at(tokens, j));
      } else {
        throw ContractError("MVM-R only represents bigrams");
      }
      break;
    }
    case Family::MVM:
    case Family::MVMA:
      rep.payload = multiplicative(tokens, i, j);
      break;
  }
  return rep;
}

ContextRep context_rep(const Composer& c, const TokenMaps& tokens, std::size_t t) {
  c.validate();
  const std::size_t T = tokens.length();
  if (t < 1 || t > T) throw ContractError("context position " + std::to_string(t) + " outside 1.." + std::to_string(T));
  ContextRep ctx{t, {}};
  switch (c.family) {
    case Family::VM:
    case Family::MM:
    case Family::MVM:
      ctx.payload = ngram_rep(c, tokens, 1, t).payload;
      break;
    case Family::VA_W: {
      const std::size_t first = t >= c.window ? t - c.window + 1 : 1;
      Tensor acc = ngram_rep(c, tokens, first, t).payload;
      for (std::size_t i = first + 1; i <= t; ++i) acc = add(acc, ngram_rep(c, tokens, i, t).payload);
      ctx.payload = std::move(acc);
      break;
    }
    case Family::VA_EW: {
      // h_k = g_k + C h_{k-1}: each power of C is one more application.
      Tensor h = g_at(tokens, 1);
      for (std::size_t k = 2; k <= t; ++k) h = add(g_at(tokens, k), matmul(c.C[0], h));
      ctx.payload = std::move(h);
      break;
    }
    case Family::MVM_R:
      ctx.payload = t == 1 ? g_at(tokens, 1) : ngram_rep(c, tokens, t - 1, t).payload;
      break;
    case Family::MVMA: {
      std::vector<Tensor> states =
          mvma_scan(std::span<const Tensor>(tokens.A).first(t), std::span<const Tensor>(tokens.g).first(t));
      ctx.payload = std::move(states.back());
      break;
    }
  }
  return ctx;
}

std::vector<Tensor> mvma_scan(std::span<const Tensor> A, std::span<const Tensor> g) {
  if (g.empty()) throw ContractError("mvma_scan: empty sequence");
  if (A.size() != g.size()) throw ContractError("mvma_scan: A and g lengths differ");
  std::vector<Tensor> out;
  out.reserve(g.size());
  out.push_back(g[0]);
  for (std::size_t t = 1; t < g.size(); ++t) out.push_back(add(g[t], matmul(A[t], out.back())));
  return out;
}

Tensor brute_force_context(std::span<const Tensor> A, std::span<const Tensor> g, std::size_t t) {
  if (t < 1 || t > g.size() || A.size() != g.size()) {
    throw ContractError("brute_force_context: position outside sequence");
  }
  const std::size_t d = g[0].size();
  Tensor total = Tensor::zeros({d});
  for (std::size_t i = 1; i <= t; ++i) {
    // W = A(x_t) A(x_{t-1}) ... A(x_{i+1}), identity when i == t.
    Tensor W = Tensor::identity(d);
    for (std::size_t j = t; j > i; --j) W = matmul(W, A[j - 1]);
    total = add(total, matmul(W, g[i - 1]));
  }
  return total;
}

Tensor readout(const Tensor& payload, const Tensor& u) {
  if (!payload.is_matrix()) return payload;
  return matmul(payload, u);
}

Tensor mm_compose(const Tensor& first, const Tensor& second) { return matmul(second, first); }

Tensor mm_identity(std::size_t d) { return Tensor::identity(d); }

void write_components_tsv(const std::filesystem::path& path, std::span<const NgramRep> reps) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing: " + std::strerror(errno));
  char buf[32];
  for (const auto& rep : reps) {
    out << rep.i << '\t' << rep.j;
    for (double v : rep.payload.data()) {
      std::snprintf(buf, sizeof buf, "%.12g", v);
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace ngram
