#include <doctest.h>

#include <cmath>
#include <string>

#include "core/grad_check.hpp"
#include "core/ops.hpp"
#include "core/rng.hpp"
#include "core/tape.hpp"
#include "core/tensor.hpp"
#include "support/test_util.hpp"

using namespace aepnet;
using namespace aepnet::ops;
using testutil::random_tensor;

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("elementwise add") {
  Tensor a({2}, {1, 2});
  Tensor b({2}, {3, 4});
  Tensor c = add(a, b);
  CHECK(c[0] == 4.0);
  CHECK(c[1] == 6.0);
}

TEST_CASE("mul by zeros annihilates value and gradient") {
  Tape tape;
  Tensor x = tape.leaf(Tensor({3}, {1.5, -2.0, 7.0}), true, "x");
  Tensor z = Tensor::zeros({3});
  Tensor y = mul(x, z);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y[i] == 0.0);
  GradMap g = tape.backward(reduce_sum(y));
  for (std::size_t i = 0; i < 3; ++i) CHECK(g.at("x")[i] == 0.0);
}

TEST_CASE("product rule: grad of mul(x,y) wrt x is y") {
  Tape tape;
  Tensor x = tape.leaf(Tensor({1}, {2.0}), true, "x");
  Tensor y = tape.leaf(Tensor({1}, {5.0}), true, "y");
  GradMap g = tape.backward(mul(x, y));
  CHECK(g.at("x")[0] == 5.0);
  CHECK(g.at("y")[0] == 2.0);
}

TEST_CASE("activations at reference points") {
  CHECK(sigmoid(Tensor::scalar(0.0)).scalar_value() == 0.5);
  CHECK(relu(Tensor::scalar(-3.0)).scalar_value() == 0.0);
  CHECK(relu(Tensor::scalar(3.0)).scalar_value() == 3.0);

  Tape tape;
  Tensor x = tape.leaf(Tensor::scalar(0.0), true, "x");
  GradMap g = tape.backward(sigmoid(x));
  CHECK(g.at("x")[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("relu gradient at exactly zero is zero") {
  Tape tape;
  Tensor x = tape.leaf(Tensor({3}, {-1.0, 0.0, 1.0}), true, "x");
  GradMap g = tape.backward(reduce_sum(relu(x)));
  CHECK(g.at("x")[0] == 0.0);
  CHECK(g.at("x")[1] == 0.0);
  CHECK(g.at("x")[2] == 1.0);
}

TEST_CASE("linear layer") {
  SUBCASE("identity weight leaves input unchanged") {
    Tensor x({2}, {3.0, -4.0});
    Tensor w({2, 2}, {1, 0, 0, 1});
    Tensor b = Tensor::zeros({2});
    Tensor y = linear(x, w, b);
    CHECK(y[0] == 3.0);
    CHECK(y[1] == -4.0);
  }
  SUBCASE("dot product") {
    Tensor y = linear(Tensor({2}, {1, 1}), Tensor({1, 2}, {1, 2}), Tensor({1}, {3}));
    CHECK(y[0] == 6.0);
  }
  SUBCASE("weight gradient is outer product g x^T") {
    Tape tape;
    Rng rng(7);
    Tensor x({3}, {1.0, -2.0, 0.5});
    Tensor w = tape.leaf(random_tensor(rng, {2, 3}), true, "w");
    Tensor b = Tensor::zeros({2});
    Tensor y = linear(x, w, b);
    // loss = g . y with fixed upstream g
    Tensor g_up({2}, {0.7, -1.3});
    GradMap g = tape.backward(reduce_sum(mul(y, g_up)));
    for (int o = 0; o < 2; ++o)
      for (int i = 0; i < 3; ++i) CHECK(g.at("w")[o * 3 + i] == doctest::Approx(g_up[o] * x[i]));
  }
}

TEST_CASE("reductions") {
  CHECK(reduce_sum(Tensor({3}, {1, 2, 3})).scalar_value() == 6.0);
  CHECK(reduce_mean(Tensor::full({4, 5}, 2.25)).scalar_value() == doctest::Approx(2.25));

  Tape tape;
  Rng rng(3);
  Tensor x = tape.leaf(random_tensor(rng, {2, 3}), true, "x");
  GradMap g = tape.backward(reduce_sum(x));
  for (std::size_t i = 0; i < 6; ++i) CHECK(g.at("x")[i] == 1.0);

  SUBCASE("axis reduction keeps remaining extents") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor s = reduce_sum(t, {1});
    REQUIRE(s.shape == Shape{2});
    CHECK(s[0] == 6.0);
    CHECK(s[1] == 15.0);
    Tensor m = reduce_mean(t, {0});
    REQUIRE(m.shape == Shape{3});
    CHECK(m[0] == 2.5);
    CHECK(m[2] == 4.5);
  }
  SUBCASE("invalid axis rejected") {
    CHECK_THROWS_AS(reduce_sum(Tensor::zeros({2, 2}), {2}), std::invalid_argument);
  }
}

TEST_CASE("backward on analytic examples") {
  SUBCASE("f(x) = x^2 at x=3") {
    Tape tape;
    Tensor x = tape.leaf(Tensor::scalar(3.0), true, "x");
    GradMap g = tape.backward(mul(x, x));
    CHECK(g.at("x")[0] == 6.0);
  }
  SUBCASE("f(x,y) = x*y at (2,5)") {
    Tape tape;
    Tensor x = tape.leaf(Tensor::scalar(2.0), true, "x");
    Tensor y = tape.leaf(Tensor::scalar(5.0), true, "y");
    GradMap g = tape.backward(mul(x, y));
    CHECK(g.at("x")[0] == 5.0);
    CHECK(g.at("y")[0] == 2.0);
  }
  SUBCASE("non-scalar loss rejected") {
    Tape tape;
    Tensor x = tape.leaf(Tensor::zeros({2}), true, "x");
    CHECK_THROWS_AS(tape.backward(scale(x, 2.0)), std::invalid_argument);
  }
  SUBCASE("detached loss rejected") {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), std::invalid_argument);
  }
  SUBCASE("unreached parameter gets zero gradient of its shape") {
    Tape tape;
    Tensor x = tape.leaf(Tensor::scalar(2.0), true, "x");
    Tensor unused = tape.leaf(Tensor::zeros({2, 2}), true, "unused");
    GradMap g = tape.backward(mul(x, x));
    REQUIRE(g.count("unused") == 1);
    CHECK(g.at("unused").shape == Shape{2, 2});
    for (std::size_t i = 0; i < 4; ++i) CHECK(g.at("unused")[i] == 0.0);
  }
}

TEST_CASE("shape mismatch reports both shapes") {
  try {
    add(Tensor::zeros({2, 3}), Tensor::zeros({4}));
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4]") != std::string::npos);
  }
}

TEST_CASE("grad_check on a quadratic form is exact to rounding") {
  // f(p) = sum(p*p) has an exact central difference.
  ScalarFn f = [](Tape*, const std::vector<Tensor>& ps) {
    return reduce_sum(mul(ps[0], ps[0]));
  };
  Rng rng(11);
  double err = grad_check(f, {random_tensor(rng, {5})}, 1e-5);
  CHECK(err < 1e-8);
}

TEST_CASE("grad_check on sigmoid chain of depth 3") {
  ScalarFn f = [](Tape*, const std::vector<Tensor>& ps) {
    return reduce_sum(sigmoid(sigmoid(sigmoid(ps[0]))));
  };
  Rng rng(12);
  double err = grad_check(f, {random_tensor(rng, {6}, -2.0, 2.0)}, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("grad_check flags a corrupted backward rule (negative control)") {
  // Same forward as sigmoid but the backward multiplies the true rule by 1.5.
  ScalarFn f = [](Tape* tape, const std::vector<Tensor>& ps) {
    const Tensor& x = ps[0];
    Tensor out = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
    if (tape) {
      int px = x.node;
      out = tape->record(std::move(out), {px},
                         [px](Tape& t, int self, const std::vector<double>& g) {
                           const Tensor& s = t.value(self);
                           auto& gx = t.grad_buffer(px);
                           for (std::size_t i = 0; i < g.size(); ++i)
                             gx[i] += 1.5 * g[i] * s[i] * (1.0 - s[i]);
                         });
    }
    return reduce_sum(out);
  };
  Rng rng(13);
  double err = grad_check(f, {random_tensor(rng, {4}, -2.0, 2.0)}, 1e-5);
  CHECK(err > 1e-2);
}

TEST_CASE("every elementwise/activation/reduce op passes finite differences on random inputs") {
  Rng rng(101);
  int draws = 0;
  double worst = 0.0;
  while (draws < 100) {
    Shape shape{2 + rng.uniform_int(3), 1 + rng.uniform_int(4)};
    Tensor a = random_tensor(rng, shape, -2.0, 2.0);
    Tensor b = random_tensor(rng, shape, 0.5, 2.5);  // away from 0 so div stays smooth
    int which = draws % 10;
    ScalarFn f = [which, b](Tape*, const std::vector<Tensor>& ps) {
      const Tensor& x = ps[0];
      switch (which) {
        case 0: return reduce_sum(add(x, b));
        case 1: return reduce_sum(sub(x, b));
        case 2: return reduce_sum(mul(x, b));
        case 3: return reduce_sum(div(x, b));
        case 4: return reduce_sum(scale(x, -1.75));
        case 5: return reduce_sum(sigmoid(x));
        case 6: return reduce_mean(mul(x, x));
        case 7: return reduce_sum(reduce_mean(x, {1}));
        case 8: return reduce_sum(mul(softmax_channels(x), x));
        default: return reduce_sum(mul(softmax_channels(x), b));
      }
    };
    double err = grad_check(f, {a}, 1e-5);
    worst = std::max(worst, err);
    ++draws;
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("relu passes finite differences away from the kink") {
  Rng rng(55);
  double worst = 0.0;
  for (int d = 0; d < 20; ++d) {
    Tensor x = random_tensor(rng, {8}, -2.0, 2.0);
    for (std::size_t i = 0; i < x.numel(); ++i)
      if (std::abs(x[i]) < 1e-3) x[i] = 0.5;  // keep FD clear of the nondifferentiable point
    ScalarFn f = [](Tape*, const std::vector<Tensor>& ps) { return reduce_sum(relu(ps[0])); };
    worst = std::max(worst, grad_check(f, {x}, 1e-5));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(21);
  Tensor x0 = random_tensor(rng, {6}, -1.0, 1.0);
  const double a = 1.7, b = -0.6;

  auto grads_for = [&](double ca, double cb) {
    Tape tape;
    Tensor x = tape.leaf(x0, true, "x");
    Tensor l1 = reduce_sum(mul(x, x));
    Tensor l2 = reduce_sum(sigmoid(x));
    Tensor loss = add(scale(l1, ca), scale(l2, cb));
    return tape.backward(loss).at("x");
  };

  Tensor g_combined = grads_for(a, b);
  Tensor g1 = grads_for(1.0, 0.0);
  Tensor g2 = grads_for(0.0, 1.0);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(std::abs(g_combined[i] - (a * g1[i] + b * g2[i])) < 1e-12);
}

TEST_CASE("identical graphs give bit-identical outputs and gradients") {
  Rng rng(31);
  Tensor x0 = random_tensor(rng, {5}, -1.0, 1.0);
  auto run = [&]() {
    Tape tape;
    Tensor x = tape.leaf(x0, true, "x");
    Tensor loss = reduce_mean(mul(sigmoid(x), x));
    GradMap g = tape.backward(loss);
    return std::make_pair(loss.scalar_value(), g.at("x"));
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  CHECK(v1 == v2);
  for (std::size_t i = 0; i < 5; ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("softmax channel sums are one") {
  Rng rng(41);
  Tensor x = random_tensor(rng, {2, 3, 2}, -3.0, 3.0);
  Tensor p = softmax_channels(x);
  std::size_t spatial = 6;
  for (std::size_t i = 0; i < spatial; ++i)
    CHECK(p[i] + p[spatial + i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("detached tensors never accumulate gradient") {
  Tape tape;
  Tensor x = tape.leaf(Tensor::scalar(2.0), true, "x");
  Tensor c = Tensor::scalar(3.0);  // stays detached from the caller's view
  Tensor y = mul(x, c);
  tape.backward(y);
  CHECK(!c.attached());
  CHECK(c.node == -1);
}

TEST_CASE("operands on different tapes are rejected") {
  Tape t1, t2;
  Tensor a = t1.leaf(Tensor::scalar(1.0));
  Tensor b = t2.leaf(Tensor::scalar(2.0));
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
}

TEST_SUITE_END();
