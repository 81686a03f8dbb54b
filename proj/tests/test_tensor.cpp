#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "nmtwp/grad_check.hpp"
#include "nmtwp/tensor.hpp"

using nmtwp::DimensionError;
using nmtwp::Tape;
using TD = nmtwp::Tensor<double>;
using TapeD = nmtwp::Tape<double>;

TEST_CASE("tensor construction enforces positive dims and element count") {
  CHECK_THROWS_AS(TD::zeros({0, 3}), DimensionError);
  CHECK_THROWS_AS(TD::from({2}, {1.0}), DimensionError);
  TD s = TD::scalar(4.0);
  CHECK(s.rank() == 0);
  CHECK(s.item() == 4.0);
}

TEST_CASE("matmul identity and hand arithmetic") {
  TD eye = TD::from({2, 2}, {1, 0, 0, 1});
  TD a = TD::from({2, 2}, {1, 2, 3, 4});
  TD out = nmtwp::matmul<double>(nullptr, eye, a);
  CHECK(out.data() == std::vector<double>{1, 2, 3, 4});

  TD r = TD::from({1, 2}, {1, 2});
  TD c = TD::from({2, 1}, {3, 4});
  CHECK(nmtwp::matmul<double>(nullptr, r, c).data()[0] == doctest::Approx(11.0));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  TD a = TD::from({2, 3}, {1, 2, 3, 4, 5, 6});
  TD b = TD::from({4}, {1, 2, 3, 4});
  try {
    nmtwp::matmul<double>(nullptr, a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches finite differences") {
  // d(sum(A B))/dA at A=[[1,1]], B=[[2],[5]] is [[2,5]].
  TD a = TD::from({1, 2}, {1, 1});
  TD b = TD::from({2, 1}, {2, 5});
  a.set_requires_grad(true);
  TapeD tape;
  TD prod = nmtwp::matmul(&tape, a, b);
  TD loss = nmtwp::sum(&tape, prod);
  tape.backward(loss);
  CHECK(a.grad()[0] == doctest::Approx(2.0));
  CHECK(a.grad()[1] == doctest::Approx(5.0));

  const double err = nmtwp::grad_check(
      [&b](TapeD* t, const TD& x) {
        return nmtwp::sum(t, nmtwp::matmul(t, x, b));
      },
      TD::from({1, 2}, {1, 1}));
  CHECK(err < 1e-7);
}

TEST_CASE("elementwise basics") {
  TD z = TD::vector({0.0});
  CHECK(nmtwp::sigmoid<double>(nullptr, z).data()[0] == doctest::Approx(0.5));
  CHECK(nmtwp::tanh<double>(nullptr, z).data()[0] == doctest::Approx(0.0));

  // d/dx sigmoid at 0 = 0.25
  TD x = TD::vector({0.0});
  x.set_requires_grad(true);
  TapeD tape;
  TD y = nmtwp::sigmoid(&tape, x);
  TD loss = nmtwp::sum(&tape, y);
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(0.25));
}

TEST_CASE("elementwise shape mismatch raises") {
  TD a = TD::vector({1, 2});
  TD b = TD::vector({1, 2, 3});
  CHECK_THROWS_AS(nmtwp::mul<double>(nullptr, a, b), DimensionError);
  CHECK_THROWS_AS(nmtwp::add<double>(nullptr, a, b), DimensionError);
}

TEST_CASE("bias broadcast add over matrix rows") {
  TD m = TD::from({2, 3}, {1, 2, 3, 4, 5, 6});
  TD b = TD::vector({10, 20, 30});
  b.set_requires_grad(true);
  TapeD tape;
  TD out = nmtwp::add(&tape, m, b);
  CHECK(out.data() == std::vector<double>{11, 22, 33, 14, 25, 36});
  TD loss = nmtwp::sum(&tape, out);
  tape.backward(loss);
  CHECK(b.grad() == std::vector<double>{2, 2, 2});
}

TEST_CASE("softmax basics") {
  CHECK(nmtwp::softmax<double>(nullptr, TD::vector({0, 0})).data()[0] == doctest::Approx(0.5));

  // No overflow under huge equal logits.
  TD big = nmtwp::softmax<double>(nullptr, TD::vector({1000, 1000, 1000}));
  for (double v : big.data()) CHECK(v == doctest::Approx(1.0 / 3));

  TD lg = nmtwp::softmax<double>(
      nullptr, TD::vector({std::log(1.0), std::log(2.0), std::log(3.0)}));
  CHECK(lg.data()[0] == doctest::Approx(1.0 / 6));
  CHECK(lg.data()[1] == doctest::Approx(2.0 / 6));
  CHECK(lg.data()[2] == doctest::Approx(3.0 / 6));

  CHECK_THROWS_AS(nmtwp::softmax<double>(nullptr, TD::from({2, 2}, {1, 2, 3, 4})),
                  DimensionError);
}

TEST_CASE("softmax sums to one and is permutation equivariant") {
  TD v = TD::vector({0.3, -1.2, 2.0, 0.7});
  TD s = nmtwp::softmax<double>(nullptr, v);
  double total = 0;
  for (double x : s.data()) total += x;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));

  TD vp = TD::vector({2.0, 0.7, 0.3, -1.2});
  TD sp = nmtwp::softmax<double>(nullptr, vp);
  CHECK(sp.data()[0] == doctest::Approx(s.data()[2]));
  CHECK(sp.data()[1] == doctest::Approx(s.data()[3]));
  CHECK(sp.data()[2] == doctest::Approx(s.data()[0]));
  CHECK(sp.data()[3] == doctest::Approx(s.data()[1]));
}

TEST_CASE("log_softmax agrees with log of softmax and its gradient checks") {
  TD v = TD::vector({0.1, -0.4, 1.7});
  TD ls = nmtwp::log_softmax<double>(nullptr, v);
  TD s = nmtwp::softmax<double>(nullptr, v);
  for (int i = 0; i < 3; ++i) CHECK(ls.data()[i] == doctest::Approx(std::log(s.data()[i])));

  const double err = nmtwp::grad_check(
      [](TapeD* t, const TD& x) { return nmtwp::pick(t, nmtwp::log_softmax(t, x), 1); },
      TD::vector({0.3, -0.2, 0.9}));
  CHECK(err < 1e-5);
}

TEST_CASE("concat joins vectors and splits gradient") {
  TD a = TD::vector({1, 2});
  TD b = TD::vector({3});
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  TapeD tape;
  TD out = nmtwp::concat(&tape, {a, b});
  CHECK(out.data() == std::vector<double>{1, 2, 3});
  TD loss = nmtwp::sum(&tape, out);
  tape.backward(loss);
  CHECK(a.grad() == std::vector<double>{1, 1});
  CHECK(b.grad() == std::vector<double>{1});

  CHECK_THROWS_AS(nmtwp::concat<double>(nullptr, {}), DimensionError);
  TD m = TD::from({1, 2}, {1, 2});
  CHECK_THROWS_AS(nmtwp::concat<double>(nullptr, {a, m}), DimensionError);
}

TEST_CASE("backward of x*x and of a constant") {
  TD x = TD::vector({1, 2, 3});
  x.set_requires_grad(true);
  TapeD tape;
  TD loss = nmtwp::sum(&tape, nmtwp::mul(&tape, x, x));
  tape.backward(loss);
  CHECK(x.grad() == std::vector<double>{2, 4, 6});

  // A loss that never touched the tape leaves gradients untouched.
  TD y = TD::vector({1.0});
  y.set_requires_grad(true);
  y.ensure_grad();
  TapeD tape2;
  TD c = TD::scalar(7.0);
  tape2.backward(c);
  CHECK(y.grad() == std::vector<double>{0});
}

TEST_CASE("backward rejects non-scalar loss and double consumption") {
  TD x = TD::vector({1, 2});
  x.set_requires_grad(true);
  TapeD tape;
  TD y = nmtwp::mul(&tape, x, x);
  CHECK_THROWS_AS(tape.backward(y), DimensionError);
  TapeD tape2;
  TD loss = nmtwp::sum(&tape2, nmtwp::mul(&tape2, x, x));
  tape2.backward(loss);
  CHECK_THROWS_AS(tape2.backward(loss), std::logic_error);
}

TEST_CASE("grad_check flags a corrupted backward rule") {
  // Custom op with a deliberately wrong local gradient (1.5x).
  auto bad_double = [](TapeD* tape, const TD& x) {
    TD out = TD::zeros(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) out.data()[i] = 2.0 * x.data()[i];
    if (tape && tape->wants_grad(x)) {
      TD xc = x;
      tape->record({x}, out, [xc, out]() mutable {
        if (!out.has_grad()) return;
        xc.ensure_grad();
        for (std::size_t i = 0; i < xc.numel(); ++i) xc.grad()[i] += 3.0 * out.grad()[i];
      });
    }
    return out;
  };
  const double err = nmtwp::grad_check(
      [&](TapeD* t, const TD& x) { return nmtwp::sum(t, bad_double(t, x)); },
      TD::vector({0.5, -0.3}));
  CHECK(err > 1e-2);

  const double good = nmtwp::grad_check(
      [](TapeD* t, const TD& x) { return nmtwp::sum(t, nmtwp::sigmoid(t, x)); },
      TD::vector({0.0}));
  CHECK(good < 1e-7);
}

TEST_CASE("grad_check covers composite expressions") {
  const double err = nmtwp::grad_check(
      [](TapeD* t, const TD& x) {
        TD h = nmtwp::tanh(t, x);
        TD g = nmtwp::sigmoid(t, nmtwp::mul(t, h, x));
        TD p = nmtwp::softmax(t, g);
        return nmtwp::pick(t, nmtwp::log_softmax(t, nmtwp::concat(t, {p, h})), 2);
      },
      TD::vector({0.4, -1.1, 0.3}));
  CHECK(err < 1e-6);
}

TEST_CASE("row, take_rows, pick, stack and matvec_t gradients") {
  const double err = nmtwp::grad_check(
      [](TapeD* t, const TD& m) {
        TD r0 = nmtwp::row(t, m, 0);
        TD r1 = nmtwp::row(t, m, 1);
        TD sub = nmtwp::take_rows(t, m, {1, 0, 1});
        TD w = nmtwp::softmax(t, nmtwp::stack(t, {nmtwp::sum(t, r0), nmtwp::sum(t, r1),
                                                  nmtwp::dot(t, r0, r1)}));
        TD c = nmtwp::matvec_t(t, sub, w);
        return nmtwp::sum(t, nmtwp::tanh(t, c));
      },
      TD::from({2, 3}, {0.1, -0.2, 0.3, 0.4, 0.5, -0.6}));
  CHECK(err < 1e-6);
}

TEST_CASE("mean_rows and scale and sub_from_one") {
  TD m = TD::from({2, 2}, {1, 3, 5, 7});
  TD mu = nmtwp::mean_rows<double>(nullptr, m);
  CHECK(mu.data() == std::vector<double>{3, 5});

  const double err = nmtwp::grad_check(
      [](TapeD* t, const TD& m2) {
        TD mu2 = nmtwp::mean_rows(t, m2);
        TD z = nmtwp::sigmoid(t, mu2);
        return nmtwp::sum(t, nmtwp::mul(t, nmtwp::sub_from_one(t, z), nmtwp::scale(t, mu2, 2.0)));
      },
      TD::from({3, 2}, {0.1, 0.2, -0.3, 0.4, 0.5, -0.6}));
  CHECK(err < 1e-6);
}

TEST_CASE("tape-free forward is bit identical across runs") {
  TD w = TD::from({3, 3}, {0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, -0.8, 0.9});
  TD x = TD::vector({0.2, -0.4, 0.6});
  auto run = [&]() {
    return nmtwp::softmax<double>(nullptr,
                                  nmtwp::tanh<double>(nullptr, nmtwp::matmul<double>(nullptr, w, x)));
  };
  TD a = run(), b = run();
  CHECK(std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0);
}
