#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "ngram/errors.hpp"
#include "ngram/interpret.hpp"

using namespace ngram;

namespace {

std::vector<Tensor> random_inputs(std::size_t T, std::size_t dx, Rng& rng) {
  std::vector<Tensor> xs;
  for (std::size_t t = 0; t < T; ++t) xs.push_back(oracle::random_tensor({dx}, rng));
  return xs;
}

LabeledInstance inst(double label, std::vector<std::string> toks) { return {label, std::move(toks)}; }

}  // namespace

TEST_CASE("component enumeration") {
  Rng rng(1);
  SUBCASE("single token") {
    const TokenMaps m = fixture::random_maps(3, 1, rng);
    const auto comps = enumerate_components(m.A, m.g);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].i == 1);
    CHECK(comps[0].t == 1);
    CHECK(comps[0].v == m.g[0]);
  }
  SUBCASE("sums per end position reproduce the scan") {
    for (std::size_t T : {3u, 8u, 13u}) {
      const TokenMaps m = fixture::random_maps(5, T, rng);
      const auto comps = enumerate_components(m.A, m.g);
      CHECK(comps.size() == T * (T + 1) / 2);
      const auto h = mvma_scan(m.A, m.g);
      std::vector<Tensor> sums(T, Tensor::zeros({5}));
      for (const auto& c : comps) sums[c.t - 1] = add(sums[c.t - 1], c.v);
      for (std::size_t t = 0; t < T; ++t) CHECK(relative_diff(sums[t], h[t]) <= 1e-10);
    }
  }
  SUBCASE("each component equals the per-span representation") {
    const TokenMaps m = fixture::random_maps(4, 8, rng);
    Composer c;
    c.family = Family::MVMA;
    for (const auto& comp : enumerate_components(m.A, m.g))
      CHECK(relative_diff(comp.v, ngram_rep(c, m, comp.i, comp.t).payload) <= 1e-12);
  }
  SUBCASE("LSTM components are the h block") {
    const auto lin = fixture::random_linearized(Provenance::L, 3, 4, rng);
    const auto xs = random_inputs(5, 3, rng);
    const auto comps = enumerate_components(lin, xs);
    const TokenMaps m = [&] {
      TokenMaps mm;
      for (const auto& x : xs) {
        auto s = lin.at(x);
        mm.A.push_back(s.A);
        mm.g.push_back(s.g);
      }
      return mm;
    }();
    const auto h = mvma_scan(m.A, m.g);
    std::vector<Tensor> sums(5, Tensor::zeros({4}));
    for (const auto& c : comps) {
      CHECK(c.v.size() == 4);
      sums[c.t - 1] = add(sums[c.t - 1], c.v);
    }
    for (std::size_t t = 0; t < 5; ++t) {
      const Tensor hb = Tensor::vector({h[t][4], h[t][5], h[t][6], h[t][7]});
      CHECK(relative_diff(sums[t], hb) <= 1e-10);
    }
  }
}

TEST_CASE("polarity scores") {
  Rng rng(2);
  const TokenMaps m = fixture::random_maps(4, 6, rng);
  const auto comps = enumerate_components(m.A, m.g);
  SUBCASE("zero direction") {
    const auto r = polarity_scores(Tensor::zeros({4}), comps);
    for (const auto& row : r.span_scores)
      for (double s : row) CHECK(s == 0.0);
  }
  SUBCASE("basis direction picks a coordinate") {
    const auto r = polarity_scores(Tensor::vector({0, 0, 1, 0}), comps);
    for (const auto& c : comps) CHECK(r.score(c.i, c.t) == c.v[2]);
  }
  SUBCASE("context score is linear in the components") {
    const Tensor w = oracle::random_tensor({4}, rng);
    const auto r = polarity_scores(w, comps);
    const auto h = mvma_scan(m.A, m.g);
    for (std::size_t t = 0; t < 6; ++t) {
      const double want = dot(w, h[t]);
      CHECK(std::abs(r.context[t] - want) <= 1e-10 * std::max(1.0, std::abs(want)));
    }
  }
  CHECK_THROWS_AS(polarity_scores(Tensor::zeros({3}), comps), ShapeError);
}

TEST_CASE("approximation error on an affine cell is zero") {
  Rng rng(3);
  CellParams p = CellParams::init(CellKind::Elman, 3, 5, rng, true);
  p.activation = Activation::Identity;
  p.param("b_h").value = oracle::random_tensor({5}, rng);
  const auto lin = LinearizedCell::from_cell(p);
  const auto tr = approx_error_trace(p, lin, random_inputs(20, 3, rng));
  CHECK(tr.defined_count() == 20);
  for (double e : tr.errors) CHECK(e <= 1e-12);
  CHECK(tr.mean <= 1e-12);
}

TEST_CASE("approximation error flags all-zero states") {
  Rng rng(4);
  for (CellKind kind : {CellKind::Elman, CellKind::GRU, CellKind::LSTM}) {
    const CellParams p = CellParams::init(kind, 3, 4, rng);
    const auto lin = LinearizedCell::from_cell(p);
    const std::vector<Tensor> zeros(5, Tensor::zeros({3}));
    const auto tr = approx_error_trace(p, lin, zeros);
    CHECK(tr.errors.size() == 5);
    CHECK(tr.defined_count() == 0);
    for (bool d : tr.defined) CHECK_FALSE(d);
  }
}

TEST_CASE("approximation error on a tanh GRU is finite and positive") {
  Rng rng(5);
  const CellParams p = CellParams::init(CellKind::GRU, 4, 6, rng);
  const auto lin = LinearizedCell::from_cell(p);
  const auto xs = random_inputs(15, 4, rng);
  const auto tr = approx_error_trace(p, lin, xs, 1e-5);
  CHECK(tr.weight_decay == 1e-5);
  CHECK(tr.mean > 0.0);
  CHECK(std::isfinite(tr.mean));
  // The first step starts from the zero state, where g is exact.
  CHECK(tr.errors[0] <= 1e-15);
  for (double e : tr.errors) CHECK(e >= 0.0);
  const auto acc = approx_error_trace(p, lin, xs, 1e-5, ApproxMode::Accumulated);
  CHECK(acc.errors.size() == 15);
  const auto other = LinearizedCell::from_cell(CellParams::init(CellKind::Elman, 4, 6, rng));
  CHECK_THROWS_AS(approx_error_trace(p, other, xs), ContractError);
}

TEST_CASE("polar token extraction") {
  std::vector<LabeledInstance> corpus;
  for (int k = 0; k < 9; ++k) corpus.push_back(inst(1, {"great", "film"}));
  corpus.push_back(inst(0, {"great", "plot"}));
  for (int k = 0; k < 9; ++k) corpus.push_back(inst(0, {"dull", "film"}));
  const auto p = extract_polar_tokens(corpus);
  CHECK(p.positive.count("great"));  // (9 + 1) / (1 + 1) = 5
  CHECK(p.negative.count("dull"));
  CHECK_FALSE(p.positive.count("film"));  // equal counts
  CHECK_FALSE(p.negative.count("film"));
  const auto lex = extract_polar_tokens(corpus, 3.0, 1.0, std::set<std::string>{"great"});
  CHECK(lex.positive == std::set<std::string>{"great"});
  CHECK(lex.negative.empty());
  CHECK_THROWS_AS(extract_polar_tokens(std::vector<LabeledInstance>{}), ContractError);
  CHECK_THROWS_AS(extract_polar_tokens(corpus, 1.0), ContractError);
}

TEST_CASE("polar tokens from generated data") {
  SynthSpec spec = SynthSpec::default_spec();
  spec.max_modifiers = 0;
  const auto data = gen_synthetic_polarity(spec, 600);
  const auto p = extract_polar_tokens(data);
  CHECK(p.positive.count("good"));
  CHECK(p.negative.count("bad"));
  for (double th : {1.01, 1.5, 3.0, 10.0}) {
    const auto q = extract_polar_tokens(data, th);
    for (const auto& t : q.positive) CHECK_FALSE(q.negative.count(t));
  }
}

TEST_CASE("heatmap export and parse") {
  fixture::TempDir dir;
  Rng rng(6);
  SUBCASE("single token") {
    const TokenMaps m = fixture::random_maps(3, 1, rng);
    const auto r = polarity_scores(oracle::random_tensor({3}, rng), enumerate_components(m.A, m.g), {"good"});
    export_heatmap_tsv(r, dir / "h.tsv");
    const auto tab = parse_heatmap_tsv(dir / "h.tsv");
    CHECK(tab.tokens == std::vector<std::string>{"good"});
    REQUIRE(tab.cells.size() == 1);
    REQUIRE(tab.cells[0].size() == 1);
  }
  SUBCASE("lower triangle with round trip") {
    const TokenMaps m = fixture::random_maps(3, 3, rng);
    const auto r =
        polarity_scores(oracle::random_tensor({3}, rng), enumerate_components(m.A, m.g), {"not", "very", "good"});
    export_heatmap_tsv(r, dir / "h.tsv");
    const auto tab = parse_heatmap_tsv(dir / "h.tsv");
    std::size_t filled = 0;
    for (std::size_t t = 1; t <= 3; ++t) {
      for (std::size_t i = 1; i <= 3; ++i) {
        const auto& cell = tab.cells[t - 1][i - 1];
        if (i > t) {
          CHECK_FALSE(cell.has_value());
          continue;
        }
        REQUIRE(cell.has_value());
        ++filled;
        CHECK(std::abs(*cell - r.score(i, t)) <= 1e-9 * std::max(1.0, std::abs(r.score(i, t))));
      }
    }
    CHECK(filled == 6);
    std::ifstream in(dir / "h.tsv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "end\\start\tnot\tvery\tgood");
  }
  SUBCASE("malformed files") {
    std::ofstream(dir / "bad.tsv") << "end\\start\ta\tb\n1\tx\n";
    CHECK_THROWS_AS(parse_heatmap_tsv(dir / "bad.tsv"), DataError);
    CHECK_THROWS_AS(parse_heatmap_tsv(dir / "missing.tsv"), IoError);
  }
}

TEST_CASE("vector and context exports") {
  fixture::TempDir dir;
  const std::vector<LabeledVector> vs = {{"a", Tensor::vector({1.5, -2})}, {"b", Tensor::vector({0, 0.25})}};
  export_vectors_tsv(vs, dir / "v.tsv");
  std::ifstream in(dir / "v.tsv");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "a\t1.5\t-2\nb\t0\t0.25\n");

  PolarityReport r;
  r.tokens = {"x", "y"};
  r.span_scores = {{1.0}, {2.0, 3.0}};
  r.context = {1.0, 5.0};
  export_context_tsv(r, dir / "c.tsv");
  std::ifstream cin(dir / "c.tsv");
  std::stringstream cs;
  cs << cin.rdbuf();
  CHECK(cs.str().find("2\ty\t5") != std::string::npos);
}
