#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdae {

// Error taxonomy. The CLI maps ConfigError to exit code 1 and everything
// else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/kernel dimension mismatches.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid user-facing configuration (flags, config files, degenerate ratios).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// API misuse: plan/latent mismatch, backward on a consumed tape, etc.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed files (checkpoints, PPM, packed datasets).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses or gradients; aborts a training run.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Global worker-thread count for parallel kernels. 1 (the default) selects
// the serial reference path everywhere and makes every run fully
// deterministic. Parallel kernels only split work over independent output
// elements, so results are bitwise identical for any setting; the knob
// exists for speed, not semantics.
void set_threads(int n);
int threads();

// When enabled, differentiable ops verify their outputs are finite and
// throw TrainingError otherwise. Off by default (costs a pass per op).
void set_check_finite(bool on);
bool check_finite();

std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace sdae
