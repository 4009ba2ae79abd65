#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ngram/tensor.hpp"

namespace ngram {

// Compositional n-gram models. All multiplicative families apply the newest
// token's matrix on the left: r(x_i..x_j) = A(x_j) ... A(x_i).
enum class Family { VM, MM, VA_W, VA_EW, MVM_R, MVM, MVMA };

std::string to_string(Family f);
Family parse_family(const std::string& name);

// Per-position token maps of one sequence: A[k] = A(x_{k+1}), g[k] = g(x_{k+1}).
// Families that do not use A leave it empty.
struct TokenMaps {
  std::vector<Tensor> A;
  std::vector<Tensor> g;

  std::size_t length() const { return g.empty() ? A.size() : g.size(); }
};

struct Composer {
  Family family = Family::MVMA;
  std::size_t window = 5;  // VA-W m
  std::vector<Tensor> C;   // VA-W: C_0..C_{m-1}; VA-EW: {C}
  Tensor u;                // MM readout vector

  void validate() const;
};

// Positions are 1-based and inclusive, i <= j.
struct NgramRep {
  std::size_t i = 0;
  std::size_t j = 0;
  Tensor payload;  // d-vector, or d x d matrix for MM
};

struct ContextRep {
  std::size_t t = 0;
  Tensor payload;
};

NgramRep ngram_rep(const Composer& c, const TokenMaps& tokens, std::size_t i, std::size_t j);
ContextRep context_rep(const Composer& c, const TokenMaps& tokens, std::size_t t);

// h_t = g(x_t) + A(x_t) h_{t-1}, h_0 = 0, for t = 1..T.
std::vector<Tensor> mvma_scan(std::span<const Tensor> A, std::span<const Tensor> g);

// sum_{i<=t} A(x_t)...A(x_{i+1}) g(x_i), every term formed by explicit products.
Tensor brute_force_context(std::span<const Tensor> A, std::span<const Tensor> g, std::size_t t);

// Matrix payloads are mapped to vectors by M u; vectors pass through.
Tensor readout(const Tensor& payload, const Tensor& u);

// Monoid operation on matrix representations: r(a) (x) r(b) = r(ab) = r(b) r(a).
Tensor mm_compose(const Tensor& first, const Tensor& second);
Tensor mm_identity(std::size_t d);

// TSV: i, j, then the payload values (matrices row-major).
void write_components_tsv(const std::filesystem::path& path, std::span<const NgramRep> reps);

}  // namespace ngram
