#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sdae/optim.hpp"

using namespace sdae;

namespace {

// Scalar reference implementation of the same decoupled update, kept
// separate from the kernel so the two-step check is a genuine comparison.
struct ScalarAdamW {
  float m = 0.0f, v = 0.0f;
  long long t = 0;
  float step(float p, float g, float lr, float b1, float b2, float eps,
             float wd) {
    ++t;
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g * g;
    const float bias1 = 1.0f - std::pow(b1, static_cast<float>(t));
    const float bias2 = 1.0f - std::pow(b2, static_cast<float>(t));
    const float mhat = m / bias1;
    const float vhat = v / bias2;
    return p - lr * wd * p - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

}  // namespace

TEST_CASE("zero gradient: pure decay, moments stay zero") {
  NamedParams params;
  Tensor p = Tensor::from_data({2}, {2.0f, -4.0f}).set_requires_grad(true);
  params.add("p", p);
  AdamW opt(params, AdamWConfig{0.9f, 0.999f, 1e-8f, 0.05f});
  p.grad();  // zero gradient buffer
  opt.step(0.1f);

  const float expected0 = 2.0f - 0.1f * 0.05f * 2.0f;
  const float expected1 = -4.0f - 0.1f * 0.05f * -4.0f;
  CHECK(p.data()[0] == expected0);
  CHECK(p.data()[1] == expected1);
  CHECK(p.data()[0] == doctest::Approx(2.0f * (1.0f - 0.005f)));

  const auto state = opt.state_tensors();
  for (float v : state.find("opt.m.p")->data()) CHECK(v == 0.0f);
  for (float v : state.find("opt.v.p")->data()) CHECK(v == 0.0f);
}

TEST_CASE("first step magnitude is about lr and matches the closed form") {
  NamedParams params;
  Tensor p = Tensor::from_data({1}, {1.0f}).set_requires_grad(true);
  params.add("p", p);
  AdamW opt(params, AdamWConfig{0.9f, 0.999f, 1e-8f, 0.05f});
  p.grad()[0] = 0.5f;
  opt.step(0.1f);

  // One-step closed form: mhat = g, vhat = g^2, so the adaptive term is
  // lr * g / (|g| + eps) = lr * sign(g) up to eps.
  const double expected = 1.0 - 0.1 * 0.05 * 1.0 - 0.1 * (0.5 / (0.5 + 1e-8));
  CHECK(p.data()[0] == doctest::Approx(expected).epsilon(1e-6));
  CHECK(std::abs(1.0f - 0.005f - p.data()[0]) ==
        doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("two identical steps reproduce the scalar reference exactly") {
  NamedParams params;
  Tensor p = Tensor::from_data({1}, {1.0f}).set_requires_grad(true);
  params.add("p", p);
  AdamW opt(params, AdamWConfig{0.9f, 0.999f, 1e-8f, 0.05f});

  ScalarAdamW ref;
  float ref_p = 1.0f;
  for (int i = 0; i < 2; ++i) {
    p.grad()[0] = 0.5f;
    opt.step(0.1f);
    ref_p = ref.step(ref_p, 0.5f, 0.1f, 0.9f, 0.999f, 1e-8f, 0.05f);
  }
  CHECK(p.data()[0] == ref_p);
  CHECK(opt.step_count() == 2);
}

TEST_CASE("non-finite gradient halts and names the parameter") {
  NamedParams params;
  Tensor good = Tensor::zeros({2}).set_requires_grad(true);
  Tensor bad = Tensor::zeros({2}).set_requires_grad(true);
  params.add("encoder.block0.attn.qkv.weight", good);
  params.add("decoder.head.bias", bad);
  AdamW opt(params, AdamWConfig{});
  good.grad();
  bad.grad()[1] = std::numeric_limits<float>::quiet_NaN();
  try {
    opt.step(0.01f);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("decoder.head.bias") !=
          std::string::npos);
  }
}

TEST_CASE("optimizer state round-trips through named tensors") {
  NamedParams params;
  Tensor p = Tensor::from_data({3}, {1.0f, 2.0f, 3.0f}).set_requires_grad(true);
  params.add("w", p);
  AdamW a(params, AdamWConfig{});
  p.grad() = {0.1f, -0.2f, 0.3f};
  a.step(0.01f);

  NamedParams params2;
  Tensor q = p.clone();
  params2.add("w", q);
  AdamW b(params2, AdamWConfig{});
  b.load_state_tensors(a.state_tensors());
  b.set_step_count(a.step_count());

  p.grad() = {0.1f, -0.2f, 0.3f};
  q.grad() = {0.1f, -0.2f, 0.3f};
  a.step(0.01f);
  b.step(0.01f);
  CHECK(bitwise_equal(p, q));
}
