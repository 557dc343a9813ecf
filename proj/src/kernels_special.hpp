#pragma once

// Transcendental-heavy inner loops, compiled in their own translation unit
// with -ffast-math so the erf/exp calls lower to the libmvec SIMD variants.
// Both the serial and the OpenMP kernels call these exact functions, which
// keeps the two variants bitwise identical: results depend only on element
// values, never on how a caller chunks the range.
//
// Chunked callers must split on kSimdAlign boundaries so full-width vector
// groups cover the same absolute elements as a single whole-range call (the
// scalar tail code path can round differently from the vector body).

#include <cstddef>

namespace sdae::kernels::special {

inline constexpr std::size_t kSimdAlign = 64;

template <typename S>
void gelu_fwd(const S* x, S* y, std::size_t n);

// dx[i] += dy[i] * gelu'(x[i])
template <typename S>
void gelu_bwd(const S* x, const S* dy, S* dx, std::size_t n);

template <typename S>
void softmax_row(const S* x, S* y, std::size_t cols);

}  // namespace sdae::kernels::special
