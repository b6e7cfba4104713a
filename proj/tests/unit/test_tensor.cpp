#include <cmath>
#include <limits>

#include "doctest.h"
#include "docre/error.hpp"
#include "docre/tensor.hpp"
#include "support.hpp"

using namespace docre;
using docre::testing::max_rel_err;
using docre::testing::numeric_grad;
using docre::testing::random_tensor;

namespace {

// Gradient of loss(x) = sum(op(x) * weights) against central differences.
// The random weights make every output element matter differently.
double check_unary(const std::function<Var(Tape&, const Var&)>& op, Tensor x0, Rng& rng) {
  Var x = Var::parameter(std::move(x0));
  Tape probe;
  const Tensor w = random_tensor(op(probe, Var::constant(x.value())).shape(), rng);
  auto loss = [&] {
    Tape t;
    return sum(t, mul(t, op(t, x), Var::constant(w))).value().item();
  };
  Tape tape;
  tape.backward(sum(tape, mul(tape, op(tape, x), Var::constant(w))));
  return max_rel_err(x.grad(), numeric_grad(loss, x));
}

double check_binary(const std::function<Var(Tape&, const Var&, const Var&)>& op, Tensor a0, Tensor b0,
                    Rng& rng) {
  Var a = Var::parameter(std::move(a0));
  Var b = Var::parameter(std::move(b0));
  Tape probe;
  const Tensor w = random_tensor(op(probe, Var::constant(a.value()), Var::constant(b.value())).shape(), rng);
  auto loss = [&] {
    Tape t;
    return sum(t, mul(t, op(t, a, b), Var::constant(w))).value().item();
  };
  Tape tape;
  tape.backward(sum(tape, mul(tape, op(tape, a, b), Var::constant(w))));
  return std::max(max_rel_err(a.grad(), numeric_grad(loss, a)), max_rel_err(b.grad(), numeric_grad(loss, b)));
}

}  // namespace

TEST_CASE("matmul examples") {
  Tape t;
  const Var a = Var::constant(Tensor::matrix({{1, 2}, {3, 4}}));
  const Var eye = Var::constant(Tensor::matrix({{1, 0}, {0, 1}}));
  CHECK(matmul(t, a, eye).value() == a.value());
  const Var r = matmul(t, Var::constant(Tensor::matrix({{1, 0}})), Var::constant(Tensor::matrix({{0}, {5}})));
  CHECK(r.value() == Tensor::matrix({{0}}));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Tape t;
  const Var a = Var::constant(Tensor(Shape{2, 3}));
  const Var b = Var::constant(Tensor(Shape{2, 3}));
  try {
    matmul(t, a, b);
    FAIL("expected a dimension error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Dimension);
  }
}

TEST_CASE("matmul gradient of sum matches finite differences to 1e-6") {
  Rng rng(3);
  Var a = Var::parameter(random_tensor({3, 4}, rng));
  Var b = Var::parameter(random_tensor({4, 2}, rng));
  auto loss = [&] {
    Tape t;
    return sum(t, matmul(t, a, b)).value().item();
  };
  Tape tape;
  tape.backward(sum(tape, matmul(tape, a, b)));
  CHECK(max_rel_err(a.grad(), numeric_grad(loss, a)) <= 1e-6);
  CHECK(max_rel_err(b.grad(), numeric_grad(loss, b)) <= 1e-6);
}

TEST_CASE("elementwise examples") {
  Tape t;
  CHECK(relu(t, Var::constant(Tensor::vector({-1, 0, 2}))).value() == Tensor::vector({0, 0, 2}));
  CHECK(sigmoid(t, Var::constant(Tensor::vector({0}))).value() == Tensor::vector({0.5}));
  Rng rng(1);
  const Var x = Var::constant(Tensor::vector({1.5, -2, 3}));
  CHECK(dropout(t, x, 0.0, rng, true).value() == x.value());
  CHECK(dropout(t, x, 0.5, rng, false).value() == x.value());
}

TEST_CASE("sigmoid is stable for large magnitudes") {
  Tape t;
  const Tensor y = sigmoid(t, Var::constant(Tensor::vector({-800, 800}))).value();
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 1.0);
}

TEST_CASE("dropout keeps or scales each element and rejects bad rates") {
  Tape t;
  Rng rng(9);
  const Var x = Var::constant(Tensor(Shape{50, 4}, 2.0));
  const Tensor y = dropout(t, x, 0.25, rng, true).value();
  std::size_t zeros = 0;
  for (double v : y.values()) {
    CHECK((v == 0.0 || std::abs(v - 2.0 / 0.75) < 1e-15));
    zeros += v == 0.0;
  }
  CHECK(zeros > 20);
  CHECK(zeros < 80);
  CHECK_THROWS_AS(dropout(t, x, 1.0, rng, true), Error);
  CHECK_THROWS_AS(dropout(t, x, -0.1, rng, true), Error);
}

TEST_CASE("broadcast add and mul") {
  Tape t;
  const Var m = Var::constant(Tensor::matrix({{1, 2}, {3, 4}}));
  CHECK(add(t, m, Var::constant(Tensor::vector({10, 20}))).value() == Tensor::matrix({{11, 22}, {13, 24}}));
  CHECK(add(t, m, Var::constant(Tensor::scalar(1))).value() == Tensor::matrix({{2, 3}, {4, 5}}));
  CHECK(mul(t, m, Var::constant(Tensor::matrix({{2}, {3}}))).value() == Tensor::matrix({{2, 4}, {9, 12}}));
  CHECK_THROWS_AS(add(t, m, Var::constant(Tensor::vector({1, 2, 3}))), Error);
}

TEST_CASE("logsumexp examples") {
  Tape t;
  CHECK(logsumexp(t, Var::constant(Tensor::vector({3.7}))).value().item() == doctest::Approx(3.7).epsilon(1e-15));
  CHECK(logsumexp(t, Var::constant(Tensor::vector({2, 2}))).value().item() ==
        doctest::Approx(2 + std::log(2.0)).epsilon(1e-15));
  // Shifted-sum oracle: max + log(sum(exp(x - max))).
  const double big = logsumexp(t, Var::constant(Tensor::vector({1000, 1000}))).value().item();
  CHECK(std::isfinite(big));
  CHECK(big == doctest::Approx(1000 + std::log(std::exp(0.0) + std::exp(0.0))).epsilon(1e-15));
}

TEST_CASE("logsumexp along an axis") {
  Tape t;
  const Var m = Var::constant(Tensor::matrix({{0, 0}, {1, 2}}));
  const Tensor rows = logsumexp(t, m, 1).value();
  REQUIRE(rows.shape() == Shape{2});
  CHECK(rows[0] == doctest::Approx(std::log(2.0)));
  CHECK(rows[1] == doctest::Approx(std::log(std::exp(1.0) + std::exp(2.0))));
  const Tensor cols = logsumexp(t, m, 0).value();
  CHECK(cols[0] == doctest::Approx(std::log(1 + std::exp(1.0))));
  CHECK_THROWS_AS(logsumexp(t, Var::constant(Tensor(Shape{0})), -1), Error);
}

TEST_CASE("backward examples") {
  Var w = Var::parameter(Tensor::vector({1, 2}));
  Var unused = Var::parameter(Tensor::vector({5, 5, 5}));
  Tape t;
  t.backward(sum(t, mul(t, w, w)));
  CHECK(w.grad() == Tensor::vector({2, 4}));
  CHECK(unused.grad() == Tensor(Shape{3}, 0.0));
}

TEST_CASE("backward requires a scalar loss from the same tape") {
  Var w = Var::parameter(Tensor::vector({1, 2}));
  Tape t;
  CHECK_THROWS_AS(t.backward(mul(t, w, w)), Error);
  Tape other;
  const Var loss = sum(other, mul(other, w, w));
  CHECK_THROWS_AS(t.backward(loss), Error);
}

TEST_CASE("gradients accumulate across tapes until zeroed") {
  Var w = Var::parameter(Tensor::vector({3}));
  for (int i = 0; i < 2; ++i) {
    Tape t;
    t.backward(sum(t, scale(t, w, 2.0)));
  }
  CHECK(w.grad() == Tensor::vector({4}));
  w.zero_grad();
  CHECK(w.grad() == Tensor::vector({0}));
}

TEST_CASE("non-finite forward values raise a numeric error") {
  Tape t;
  const Var x = Var::constant(Tensor::vector({std::numeric_limits<double>::max()}));
  try {
    add(t, x, x);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
  }
}

TEST_CASE("cross entropy examples") {
  Tape t;
  CHECK(cross_entropy(t, Var::constant(Tensor::vector({0, 0})), 0).value().item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const double tiny = cross_entropy(t, Var::constant(Tensor::vector({10, -10})), 0).value().item();
  CHECK(tiny == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-12));
  CHECK_THROWS_AS(cross_entropy(t, Var::constant(Tensor::vector({0, 0})), 2), Error);
}

TEST_CASE("property: every differentiable op agrees with finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    Rng rng(seed);
    const Tensor m = random_tensor({3, 4}, rng);
    // keep relu inputs away from the kink
    Tensor away = m;
    for (auto& v : away.values()) v += v >= 0 ? 0.1 : -0.1;
    CHECK(check_unary([](Tape& t, const Var& x) { return relu(t, x); }, away, rng) < 1e-3);
    CHECK(check_unary([](Tape& t, const Var& x) { return sigmoid(t, x); }, m, rng) < 1e-3);
    CHECK(check_unary([](Tape& t, const Var& x) { return docre::tanh(t, x); }, m, rng) < 1e-3);
    CHECK(check_unary([](Tape& t, const Var& x) { return logsumexp(t, x, 1); }, m, rng) < 1e-3);
    CHECK(check_unary([](Tape& t, const Var& x) { return logsumexp(t, x, 0); }, m, rng) < 1e-3);
    CHECK(check_unary([](Tape& t, const Var& x) { return logsumexp(t, x); }, m, rng) < 1e-3);
    CHECK(check_unary([](Tape& t, const Var& x) { return transpose(t, x); }, m, rng) < 1e-6);
    CHECK(check_unary([](Tape& t, const Var& x) { return reshape(t, x, {2, 6}); }, m, rng) < 1e-6);
    CHECK(check_unary([](Tape& t, const Var& x) { return scale(t, x, -1.5); }, m, rng) < 1e-6);
    CHECK(check_unary(
              [](Tape& t, const Var& x) {
                const std::size_t rows[] = {2, 0, 2};
                return gather_rows(t, x, rows);
              },
              m, rng) < 1e-6);
    CHECK(check_unary(
              [](Tape& t, const Var& x) {
                const std::size_t rows[] = {4, 0, 4};
                return scatter_add_rows(t, x, rows, 5);
              },
              m, rng) < 1e-6);
    CHECK(check_unary([](Tape& t, const Var& x) { return cross_entropy(t, reshape(t, x, {12}), 5); }, m, rng) <
          1e-3);
    CHECK(check_binary([](Tape& t, const Var& a, const Var& b) { return matmul(t, a, b); }, m,
                       random_tensor({4, 2}, rng), rng) < 1e-6);
    CHECK(check_binary([](Tape& t, const Var& a, const Var& b) { return add(t, a, b); }, m,
                       random_tensor({4}, rng), rng) < 1e-6);
    CHECK(check_binary([](Tape& t, const Var& a, const Var& b) { return sub(t, a, b); }, m,
                       random_tensor({3, 1}, rng), rng) < 1e-6);
    CHECK(check_binary([](Tape& t, const Var& a, const Var& b) { return mul(t, a, b); }, m,
                       random_tensor({3, 4}, rng), rng) < 1e-3);
    CHECK(check_binary([](Tape& t, const Var& a, const Var& b) { return mul(t, a, b); }, m,
                       random_tensor({}, rng), rng) < 1e-3);
    CHECK(check_binary(
              [](Tape& t, const Var& a, const Var& b) {
                const Var parts[] = {a, b};
                return concat_cols(t, parts);
              },
              m, random_tensor({3, 2}, rng), rng) < 1e-6);
    CHECK(check_binary(
              [](Tape& t, const Var& a, const Var& b) {
                const Var terms[] = {a, b, a};
                return add_n(t, terms);
              },
              m, random_tensor({3, 4}, rng), rng) < 1e-6);
  }
}

TEST_CASE("property: logsumexp is shift-equivariant") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({7}, rng, -50, 50);
    const double c = rng.uniform(-100, 100);
    Tensor shifted = x;
    for (auto& v : shifted.values()) v += c;
    CHECK(logsumexp_value(shifted.values()) == doctest::Approx(logsumexp_value(x.values()) + c).epsilon(1e-12));
  }
}

TEST_CASE("rng is reproducible and derive_seed separates streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.next() == b.next());
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  Rng r(5);
  for (int i = 0; i < 1000; ++i) {
    const auto v = r.below(7);
    CHECK(v < 7);
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
  }
}
