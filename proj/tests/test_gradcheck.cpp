#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sdae/gradcheck.hpp"
#include "sdae/ops.hpp"

using namespace sdae;

TEST_CASE("finite differences confirm every kernel gradient") {
  // Short suite here; the acceptance binary runs the full 100-case sweep.
  const auto results = gradcheck::kernel_suite(4242, 25);
  CHECK(results.size() >= 20);
  for (const auto& r : results) {
    INFO(r.name, " max rel err ", r.max_rel_err);
    CHECK(r.pass);
    CHECK(r.compared > 0);
  }
}

TEST_CASE("4x5 by 5x3 matmul chain against central differences") {
  gradcheck::CheckSpec spec;
  spec.name = "matmul_chain_4x5_5x3";
  spec.cases = 100;
  spec.tolerance = 1e-4;
  spec.make_case = [](Rng& rng) {
    gradcheck::Case cs;
    auto randm = [&rng](std::size_t r, std::size_t c) {
      TensorD t = TensorD::zeros({r, c});
      for (double& v : t.data()) v = rng.normal();
      return t;
    };
    cs.inputs = {randm(4, 5).set_requires_grad(true),
                 randm(5, 3).set_requires_grad(true), randm(4, 3)};
    cs.loss = [](const std::vector<TensorD>& in) {
      return ops::sum(ops::mul(ops::matmul(in[0], in[1]), in[2]));
    };
    return cs;
  };
  const auto res = gradcheck::run_check(spec, 99);
  INFO("max rel err ", res.max_rel_err);
  CHECK(res.pass);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("end-to-end masked reconstruction gradients") {
  const auto res = gradcheck::end_to_end_check(31337, 0.02);
  INFO("max rel err ", res.max_rel_err);
  CHECK(res.pass);
  CHECK(res.compared >= 32);
}
