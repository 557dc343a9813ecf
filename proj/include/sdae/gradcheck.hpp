#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sdae/rng.hpp"
#include "sdae/tensor.hpp"

namespace sdae::gradcheck {

// Central finite differences in double precision against tape gradients.
// The FD side only evaluates forward values, so it is independent of every
// backward implementation it checks.

struct CheckResult {
  std::string name;
  std::size_t cases = 0;     // random instances
  std::size_t compared = 0;  // gradient elements compared
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct Case {
  // Tensors to differentiate with respect to get requires_grad = true;
  // constants (weights, targets) stay false and are skipped by the FD loop.
  std::vector<TensorD> inputs;
  std::function<TensorD(const std::vector<TensorD>&)> loss;
};

struct CheckSpec {
  std::string name;
  std::function<Case(Rng&)> make_case;
  std::size_t cases = 100;
  double tolerance = 1e-4;
  double step = 1e-5;
};

CheckResult run_check(const CheckSpec& spec, std::uint64_t seed);

// One spec per differentiable kernel/op.
std::vector<CheckResult> kernel_suite(std::uint64_t seed,
                                      std::size_t cases_per_kernel = 100);

// Masked reconstruction loss through a 2-block dim-32 student model;
// finite differences over a random sample of the parameter elements.
CheckResult end_to_end_check(std::uint64_t seed,
                             double sample_fraction = 0.01);

bool all_pass(const std::vector<CheckResult>& results);

}  // namespace sdae::gradcheck
