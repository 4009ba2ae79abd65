#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "ngram/errors.hpp"
#include "ngram/linearize.hpp"
#include "oracles.hpp"

using namespace ngram;

namespace {

void zero_input_weights(CellParams& p) {
  for (const auto& n : CellParams::input_weight_names(p.kind)) p.param(n).value = Tensor::zeros(p.W(n).shape());
}

double spectral(const Tensor& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return Eigen::JacobiSVD<Eigen::MatrixXd>(e).singularValues()(0);
}

}  // namespace

TEST_CASE("closed forms at the origin") {
  Rng rng(3);
  SUBCASE("Elman with zero input weights") {
    CellParams p = CellParams::init(CellKind::Elman, 3, 4, rng);
    zero_input_weights(p);
    const auto lin = linearize_token(p, oracle::random_tensor({3}, rng));
    CHECK(lin.A == p.W("W_ih"));
    CHECK(max_abs(lin.g) == 0.0);
  }
  SUBCASE("GRU with zero input weights") {
    CellParams p = CellParams::init(CellKind::GRU, 3, 4, rng);
    zero_input_weights(p);
    const auto lin = linearize_token(p, oracle::random_tensor({3}, rng));
    const Tensor want = add(scale(p.W("W_hn"), 0.25), scale(Tensor::identity(4), 0.5));
    CHECK(max_abs_diff(lin.A, want) <= 1e-15);
    CHECK(max_abs(lin.g) == 0.0);
  }
  SUBCASE("LSTM with all weights zero") {
    CellParams p = CellParams::init(CellKind::LSTM, 3, 2, rng);
    for (auto* prm : p.parameters()) prm->value = Tensor::zeros(prm->value.shape());
    const auto lin = linearize_token(p, oracle::random_tensor({3}, rng));
    const Tensor want = Tensor::matrix(4, 4, {0.5, 0, 0, 0, 0, 0.5, 0, 0, 0.25, 0, 0, 0, 0, 0.25, 0, 0});
    CHECK(lin.A == want);
    CHECK(lin.g.shape() == Shape{4});
    CHECK(max_abs(lin.g) == 0.0);
  }
}

TEST_CASE("Jacobians match finite differences and g is exact") {
  Rng rng(5);
  for (CellKind kind : {CellKind::Elman, CellKind::GRU, CellKind::LSTM}) {
    for (bool bias : {false, true}) {
      CAPTURE(to_string(kind));
      CAPTURE(bias);
      const std::size_t d = 2 + rng.below(7);
      CellParams p = CellParams::init(kind, 3, d, rng, bias);
      if (bias) {
        for (const auto& n : CellParams::bias_names(kind)) p.param(n).value = oracle::random_tensor({d}, rng, 0.5);
      }
      for (int k = 0; k < 20; ++k) {
        const Tensor x = oracle::random_tensor({3}, rng);
        const auto rep = verify_linearization(p, x, 1e-4, 1e-5);
        CHECK(rep.passed);
        CHECK(rep.max_jacobian_error <= 1e-5);
        CHECK(rep.max_value_error == 0.0);
        const auto lin = linearize_token(p, x);
        CHECK(lin.g == cell_step(p, x, CellState::zero(p)).stacked());
      }
    }
  }
}

TEST_CASE("random GRU Jacobian within 1e-6") {
  Rng rng(7);
  for (std::size_t d : {4u, 5u}) {
    const CellParams p = CellParams::init(CellKind::GRU, d, d, rng);
    const auto rep = verify_linearization(p, oracle::random_tensor({d}, rng), 1e-4, 1e-6);
    CHECK(rep.max_jacobian_error <= 1e-6);
  }
}

TEST_CASE("Elman with zero input weights is verified to 1e-9") {
  Rng rng(9);
  CellParams p = CellParams::init(CellKind::Elman, 3, 5, rng);
  zero_input_weights(p);
  const auto rep = verify_linearization(p, oracle::random_tensor({3}, rng), 1e-4, 1e-9);
  CHECK(rep.max_jacobian_error <= 1e-9);
  CHECK(rep.max_value_error <= 1e-9);
}

TEST_CASE("verify_linearization reports a wrong cell instead of throwing") {
  Rng rng(10);
  CellParams p = CellParams::init(CellKind::GRU, 3, 4, rng);
  const Tensor x = oracle::random_tensor({3}, rng);
  // A tolerance below finite-difference noise cannot pass.
  LinearizationReport rep;
  CHECK_NOTHROW(rep = verify_linearization(p, x, 1e-1, 1e-14));
  CHECK_FALSE(rep.passed);
}

TEST_CASE("ME transition norm bound") {
  Rng rng(11);
  for (int k = 0; k < 20; ++k) {
    MEParams me = MEParams::init(4, 6, rng);
    me.param("M").value = oracle::random_tensor({6, 6}, rng, 2.0);
    const Tensor x = oracle::random_tensor({4}, rng, 3.0);
    const auto lin = linearize_token(me, x);
    CHECK(spectral(lin.A) <= 0.25 * spectral(me.W("M")) + 0.5 + 1e-12);
    const auto ref = oracle::matvec(oracle::to_mat(me.W("Wprime")), oracle::to_vec(x));
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(lin.g[i] - std::tanh(ref[i])) <= 1e-14);
  }
}

TEST_CASE("factored apply matches the materialized matrix") {
  Rng rng(13);
  for (CellKind kind : {CellKind::Elman, CellKind::GRU, CellKind::LSTM}) {
    CellParams p = CellParams::init(kind, 3, 4, rng, true);
    Tape tape;
    const CellVars cv = CellVars::constants(tape, p);
    const LinearStep step = linearize_token(cv, tape.constant(oracle::random_tensor({3}, rng)));
    const Tensor h = oracle::random_tensor({step.state_dim()}, rng);
    CHECK(max_abs_diff(step.apply(tape.constant(h)).value(), matmul(step.matrix().value(), h)) <= 1e-14);
  }
  MEParams me = MEParams::init(3, 4, rng);
  Tape tape;
  const LinearStep step = linearize_token(MEVars::constants(tape, me), tape.constant(oracle::random_tensor({3}, rng)));
  const Tensor h = oracle::random_tensor({4}, rng);
  CHECK(max_abs_diff(step.apply(tape.constant(h)).value(), matmul(step.matrix().value(), h)) <= 1e-14);
}

TEST_CASE("linearization is differentiable in the cell weights") {
  Rng rng(15);
  for (CellKind kind : {CellKind::Elman, CellKind::GRU, CellKind::LSTM}) {
    CAPTURE(to_string(kind));
    CellParams p = CellParams::init(kind, 3, 3, rng, true);
    for (const auto& n : CellParams::bias_names(kind)) p.param(n).value = oracle::random_tensor({3}, rng, 0.3);
    const Tensor x = oracle::random_tensor({3}, rng);
    const std::size_t n = p.state_dim();
    const Tensor wA = oracle::random_tensor({n, n}, rng), wg = oracle::random_tensor({n}, rng);
    auto params = p.parameters();
    auto r = finite_diff_grad_check(
        [&](Tape& tape) {
          const LinearStep s = linearize_token(CellVars::bind(tape, p), tape.constant(x));
          return sum(hadamard(s.matrix(), tape.constant(wA))) + dot(s.g, tape.constant(wg));
        },
        params, 1e-4);
    CHECK(r.max_relative_error <= 1e-4);
  }
  MEParams me = MEParams::init(3, 3, rng);
  const Tensor x = oracle::random_tensor({3}, rng);
  const Tensor wA = oracle::random_tensor({3, 3}, rng);
  auto params = me.parameters();
  auto r = finite_diff_grad_check(
      [&](Tape& tape) {
        const LinearStep s = linearize_token(MEVars::bind(tape, me), tape.constant(x));
        return sum(hadamard(s.matrix(), tape.constant(wA))) + sum(s.g);
      },
      params, 1e-4);
  CHECK(r.max_relative_error <= 1e-4);
}

TEST_CASE("LinearizedCell dimensions and offsets") {
  Rng rng(17);
  const auto lstm = LinearizedCell::from_cell(CellParams::init(CellKind::LSTM, 3, 4, rng));
  CHECK(lstm.provenance() == Provenance::L);
  CHECK(lstm.state_dim() == 8);
  CHECK(lstm.output_offset() == 4);
  const auto lin = lstm.at(oracle::random_tensor({3}, rng));
  CHECK(lin.A.shape() == Shape{8, 8});
  const auto me = LinearizedCell::from_me(MEParams::init(3, 5, rng));
  CHECK(me.provenance() == Provenance::ME);
  CHECK(me.state_dim() == 5);
  CHECK(me.output_offset() == 0);
  CHECK_THROWS_AS(lstm.at(Tensor::zeros({4})), ShapeError);
}
