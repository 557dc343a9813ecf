#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sdae/ops.hpp"
#include "sdae/tensor.hpp"

using namespace sdae;

TEST_CASE("tensor shape/data invariants") {
  CHECK_THROWS_AS(Tensor::from_data({2, 3}, {1.0f, 2.0f}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), ShapeError);
  Tensor t = Tensor::zeros({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.all_finite());
  t.data()[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(Tensor{}.size(), ContractError);
  CHECK_THROWS_AS(Tensor::zeros({4}).rows(), ContractError);
}

TEST_CASE("gradient buffer matches parameter shape") {
  Tensor t = Tensor::zeros({3, 4});
  CHECK_FALSE(t.has_grad());
  t.grad()[0] = 1.0f;
  CHECK(t.has_grad());
  CHECK(t.grad().size() == t.size());
  t.zero_grad();
  CHECK(t.grad()[0] == 0.0f);
}

TEST_CASE("backward contract errors") {
  Tape tape;
  Tensor x = Tensor::from_data({2}, {1.0f, 2.0f}).set_requires_grad(true);

  SUBCASE("non-scalar loss") {
    TapeScope scope(tape);
    Tensor y = ops::scale(x, 2.0f);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
  }
  SUBCASE("empty tape") {
    CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0f)), ContractError);
  }
  SUBCASE("double backward") {
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = ops::sum(ops::mul(x, x));
    }
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), ContractError);
  }
  SUBCASE("loss detached from tape") {
    {
      TapeScope scope(tape);
      ops::scale(x, 2.0f);
    }
    CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0f)), ContractError);
  }
}

TEST_CASE("d sum(x*x) = 2x") {
  Tensor x = Tensor::from_data({3}, {1.0f, 2.0f, 3.0f}).set_requires_grad(true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = ops::sum(ops::mul(x, x));
  }
  CHECK(loss.item() == doctest::Approx(14.0));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
  CHECK(x.grad()[2] == doctest::Approx(6.0));
}

TEST_CASE("each record fires once: grad of x+x is exactly 2") {
  Tensor x = Tensor::from_data({2}, {0.5f, -1.0f}).set_requires_grad(true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = ops::sum(ops::add(x, x));
  }
  tape.backward(loss);
  CHECK(x.grad()[0] == 2.0f);
  CHECK(x.grad()[1] == 2.0f);
}

TEST_CASE("non-participating tensors stay untouched") {
  Tensor x = Tensor::from_data({2}, {1.0f, 2.0f}).set_requires_grad(true);
  Tensor c = Tensor::from_data({2}, {3.0f, 4.0f});  // constant
  Tensor unrelated =
      Tensor::from_data({2}, {9.0f, 9.0f}).set_requires_grad(true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    ops::scale(unrelated, 3.0f);  // recorded but not on the loss path
    loss = ops::sum(ops::mul(x, c));
  }
  tape.backward(loss);
  CHECK(x.grad()[0] == 3.0f);
  CHECK_FALSE(c.has_grad());
  CHECK_FALSE(unrelated.has_grad());
}

TEST_CASE("gelu derivative at zero is exactly one half") {
  Tensor x = Tensor::from_data({1}, {0.0f}).set_requires_grad(true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = ops::sum(ops::gelu(x));
  }
  tape.backward(loss);
  CHECK(x.grad()[0] == 0.5f);
}

TEST_CASE("matmul identity") {
  Tensor eye = Tensor::from_data(
      {3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor a = Tensor::from_data({3, 4}, {1,  2,  3,  4,  5,  6,  7, 8,
                                        9, 10, 11, 12});
  CHECK(bitwise_equal(ops::matmul(eye, a), a));
}

TEST_CASE("matmul shape error names the kernel and dims") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  try {
    ops::matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("softmax of a constant row is uniform") {
  Tensor x = Tensor::from_data({4}, {0.0f, 0.0f, 0.0f, 0.0f});
  Tensor y = ops::softmax(x);
  for (float v : y.data()) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("softmax is a probability vector for extreme inputs") {
  Tensor x = Tensor::from_data({2, 3}, {1000.0f, 0.0f, -1000.0f,
                                        88.0f, 88.0f, -88.0f});
  Tensor y = ops::softmax(x);
  CHECK(y.all_finite());
  for (std::size_t r = 0; r < 2; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(y.at(r, c) >= 0.0f);
      total += y.at(r, c);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("layernorm of a constant row is zero") {
  Tensor x = Tensor::from_data({4}, {5.0f, 5.0f, 5.0f, 5.0f});
  Tensor y = ops::layernorm(x, 1e-6f);
  for (float v : y.data()) CHECK(v == 0.0f);
}

TEST_CASE("layernorm shift invariance and scale equivariance") {
  TensorD x = TensorD::from_data({1, 5}, {0.3, -1.2, 2.0, 0.7, -0.5});
  TensorD shifted = TensorD::from_data({1, 5}, {0.0, 0, 0, 0, 0});
  for (std::size_t i = 0; i < 5; ++i)
    shifted.data()[i] = x.data()[i] + 13.5;
  TensorD scaled = TensorD::from_data({1, 5}, {0.0, 0, 0, 0, 0});
  for (std::size_t i = 0; i < 5; ++i) scaled.data()[i] = x.data()[i] * 4.0;

  TensorD ln_x = ops::layernorm(x, 1e-12);
  TensorD ln_shift = ops::layernorm(shifted, 1e-12);
  TensorD ln_scale = ops::layernorm(scaled, 1e-12);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(ln_shift.data()[i] == doctest::Approx(ln_x.data()[i]).epsilon(1e-9));
    CHECK(ln_scale.data()[i] == doctest::Approx(ln_x.data()[i]).epsilon(1e-9));
  }
}

TEST_CASE("reshape and transpose round-trip") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(bitwise_equal(ops::reshape(ops::reshape(a, {3, 2}), {2, 3}), a));
  CHECK(bitwise_equal(ops::transpose(ops::transpose(a)), a));
}

TEST_CASE("scatter_rows rejects duplicate indices") {
  Tensor base = Tensor::zeros({4, 2});
  Tensor src = Tensor::zeros({2, 2});
  CHECK_THROWS_AS(ops::scatter_rows(base, {1, 1}, src), ContractError);
}

TEST_CASE("cosine loss hits 0, 1, 2 and is scale invariant") {
  Tensor p = Tensor::from_data({1, 3}, {1.0f, 2.0f, 2.0f});
  Tensor anti = Tensor::from_data({1, 3}, {-1.0f, -2.0f, -2.0f});
  Tensor ortho = Tensor::from_data({1, 3}, {2.0f, -1.0f, 0.0f});
  CHECK(ops::cosine_loss(p, p, 1e-12f, true).item() ==
        doctest::Approx(0.0).epsilon(1e-6));
  CHECK(ops::cosine_loss(p, anti, 1e-12f, true).item() ==
        doctest::Approx(2.0).epsilon(1e-6));
  CHECK(ops::cosine_loss(p, ortho, 1e-12f, true).item() ==
        doctest::Approx(1.0).epsilon(1e-6));

  Tensor target = Tensor::from_data({1, 3}, {0.3f, -0.4f, 1.0f});
  const float base = ops::cosine_loss(p, target, 1e-12f, true).item();
  Tensor scaled = ops::scale(p, 37.5f);
  CHECK(ops::cosine_loss(scaled, target, 1e-12f, true).item() ==
        doctest::Approx(base).epsilon(1e-6));
}

TEST_CASE("cosine loss gradients stop at the target") {
  Tensor p =
      Tensor::from_data({2, 2}, {1.0f, 0.5f, -0.3f, 2.0f}).set_requires_grad(true);
  Tensor t =
      Tensor::from_data({2, 2}, {0.2f, 0.9f, 1.0f, -1.0f}).set_requires_grad(true);
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = ops::cosine_loss(p, t, 1e-12f, true);
  }
  tape.backward(loss);
  CHECK(p.has_grad());
  CHECK_FALSE(t.has_grad());
}

TEST_CASE("no recording without an active tape") {
  Tensor x = Tensor::from_data({2}, {1.0f, 2.0f}).set_requires_grad(true);
  Tensor y = ops::scale(x, 2.0f);
  CHECK_FALSE(y.requires_grad());
}
