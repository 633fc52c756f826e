#include "advstance/autodiff.hpp"
#include "advstance/errors.hpp"
#include "support/gradcheck.hpp"

#include "doctest.h"

#include <cmath>

using namespace advstance;
using advstance::testing::max_gradient_error;
using advstance::testing::random_matrix;
using advstance::testing::weighted_sum;

namespace {

std::vector<Var> params(Rng& rng, std::initializer_list<std::pair<int, int>> shapes) {
  std::vector<Var> out;
  for (auto [r, c] : shapes) out.push_back(Var::parameter(random_matrix(rng, r, c)));
  return out;
}

constexpr double kTol = 1e-6;

}  // namespace

TEST_CASE("matmul, matmul_nt, add, sub, add_row, scale") {
  Rng rng(1);
  auto in = params(rng, {{3, 4}, {4, 2}, {5, 2}, {1, 2}});
  auto f = [](std::vector<Var>& v) {
    Var ab = matmul(v[0], v[1]);                     // 3x2
    Var nt = matmul_nt(ab, v[2]);                    // 3x5
    Var back = matmul(nt, v[2]);                     // 3x2
    Var mixed = sub(add(back, scale(ab, 0.5)), ab);  // 3x2
    return weighted_sum(add_row(mixed, v[3]));
  };
  CHECK(max_gradient_error(in, f) < kTol);
}

TEST_CASE("nonlinearities") {
  Rng rng(2);
  auto in = params(rng, {{4, 5}});
  SUBCASE("relu") {
    auto f = [](std::vector<Var>& v) { return weighted_sum(relu(v[0])); };
    CHECK(max_gradient_error(in, f) < kTol);
  }
  SUBCASE("gelu") {
    auto f = [](std::vector<Var>& v) { return weighted_sum(gelu(v[0])); };
    CHECK(max_gradient_error(in, f) < kTol);
  }
  SUBCASE("softmax") {
    auto f = [](std::vector<Var>& v) { return weighted_sum(softmax_rows(v[0])); };
    CHECK(max_gradient_error(in, f) < kTol);
  }
}

TEST_CASE("layer_norm against finite differences and its definition") {
  Rng rng(3);
  auto in = params(rng, {{3, 6}, {1, 6}, {1, 6}});
  auto f = [](std::vector<Var>& v) { return weighted_sum(layer_norm(v[0], v[1], v[2], 1e-5)); };
  CHECK(max_gradient_error(in, f) < 1e-5);

  Var x = Var::constant(Matrix{{1.0, 2.0, 3.0, 4.0}});
  Var y = layer_norm(x, Var::constant(Matrix::Ones(1, 4)), Var::constant(Matrix::Zero(1, 4)), 0.0);
  CHECK(y.value().mean() == doctest::Approx(0.0));
  CHECK(y.value().squaredNorm() / 4.0 == doctest::Approx(1.0));
}

TEST_CASE("structural ops route gradients to the right entries") {
  Rng rng(4);
  auto in = params(rng, {{5, 3}, {2, 3}});
  const std::vector<int> ids{4, 0, 4, 2};
  auto f = [&ids](std::vector<Var>& v) {
    Var g = gather_rows(v[0], ids);                 // 4x3
    Var s = slice(g, 1, 2, 1, 2);                   // 2x2
    Var c = concat_cols(std::vector<Var>{s, v[1]});  // 2x5
    Var r = concat_rows(std::vector<Var>{c, c});    // 4x5
    return weighted_sum(r);
  };
  CHECK(max_gradient_error(in, f) < kTol);
}

TEST_CASE("constant masks and straight-through") {
  Rng rng(5);
  auto in = params(rng, {{3, 3}});
  const Matrix mask = random_matrix(rng, 3, 3);
  auto f = [&mask](std::vector<Var>& v) { return weighted_sum(add_constant(mul_constant(v[0], mask), mask)); };
  CHECK(max_gradient_error(in, f) < kTol);

  Var p = Var::parameter(Matrix{{1.25, -2.5}});
  Var st = straight_through(p, Matrix{{1.0, -2.0}});
  CHECK(st.value() == Matrix{{1.0, -2.0}});
  backward(weighted_sum(st));
  Var p2 = Var::parameter(Matrix{{1.25, -2.5}});
  backward(weighted_sum(p2));
  CHECK(p.grad() == p2.grad());
}

TEST_CASE("cross entropy matches a scalar loop") {
  Rng rng(6);
  auto in = params(rng, {{4, 3}});
  const std::vector<int> targets{0, 2, 1, 2};
  auto f = [&targets](std::vector<Var>& v) { return cross_entropy(v[0], targets); };
  CHECK(max_gradient_error(in, f) < kTol);

  double expected = 0.0;
  for (int r = 0; r < 4; ++r) {
    double z = 0.0;
    for (int c = 0; c < 3; ++c) z += std::exp(in[0].value()(r, c));
    expected += -std::log(std::exp(in[0].value()(r, targets[r])) / z);
  }
  CHECK(cross_entropy(in[0], targets).scalar() == doctest::Approx(expected / 4.0).epsilon(1e-12));
}

TEST_CASE("reverse_gradient is identity forward and scales backward by -lambda") {
  Rng rng(7);
  Var x = Var::parameter(random_matrix(rng, 2, 3));
  Var y = reverse_gradient(x, 0.1);
  CHECK(y.value() == x.value());
  backward(weighted_sum(y));
  const Matrix reversed = x.grad();
  x.zero_grad();
  backward(weighted_sum(x));
  CHECK((reversed + 0.1 * x.grad()).cwiseAbs().maxCoeff() < 1e-15);

  Var z = Var::parameter(random_matrix(rng, 2, 3));
  backward(weighted_sum(reverse_gradient(z, 0.0)));
  CHECK(z.grad().cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(reverse_gradient(z, -1.0), ConfigError);
}

TEST_CASE("shared subexpressions accumulate and repeated backward resets intermediates") {
  Var x = Var::parameter(Matrix{{2.0}});
  Var y = matmul(x, x);  // x^2
  Var z = add(y, y);     // 2 x^2
  backward(z);
  CHECK(x.grad()(0, 0) == doctest::Approx(8.0));
  x.zero_grad();
  backward(z);
  CHECK(x.grad()(0, 0) == doctest::Approx(8.0));
}

TEST_CASE("shape errors") {
  Var a = Var::constant(Matrix::Zero(2, 3));
  Var b = Var::constant(Matrix::Zero(2, 3));
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(add(a, Var::constant(Matrix::Zero(3, 2))), ShapeError);
  CHECK_THROWS_AS(backward(a), ShapeError);
  CHECK_THROWS_AS(gather_rows(a, std::vector<int>{2}), ShapeError);
}
