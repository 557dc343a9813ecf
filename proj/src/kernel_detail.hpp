#pragma once

// Per-row / per-element arithmetic shared by the serial and OpenMP kernel
// variants. Keeping the bodies in one place guarantees the two variants are
// bitwise identical; they differ only in how rows are distributed.

#include <cmath>
#include <cstddef>

namespace sdae::kernels::detail {

template <typename S>
inline void gemm_nn_row(std::size_t i, std::size_t n, std::size_t k,
                        const S* __restrict a, const S* __restrict b,
                        S* __restrict c, bool accumulate) {
  S* __restrict crow = c + i * n;
  if (!accumulate) {
    for (std::size_t j = 0; j < n; ++j) crow[j] = S(0);
  }
  const S* __restrict arow = a + i * k;
  for (std::size_t kk = 0; kk < k; ++kk) {
    const S aik = arow[kk];
    const S* __restrict brow = b + kk * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
  }
}

template <typename S>
inline void transpose_row(std::size_t r, const S* src, S* dst,
                          std::size_t rows, std::size_t cols) {
  const S* in = src + r * cols;
  for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = in[c];
}

// dx_j += y_j * (dy_j - sum_l y_l dy_l)
template <typename S>
inline void softmax_row_grad(const S* y, const S* dy, S* dx,
                             std::size_t cols) {
  S dot = S(0);
  for (std::size_t j = 0; j < cols; ++j) dot += y[j] * dy[j];
  for (std::size_t j = 0; j < cols; ++j) dx[j] += y[j] * (dy[j] - dot);
}

template <typename S>
inline void layernorm_row(const S* x, S* y, S* inv_std_out, std::size_t cols,
                          S eps) {
  S mean = S(0);
  for (std::size_t j = 0; j < cols; ++j) mean += x[j];
  mean /= static_cast<S>(cols);
  S var = S(0);
  for (std::size_t j = 0; j < cols; ++j) {
    const S d = x[j] - mean;
    var += d * d;
  }
  var /= static_cast<S>(cols);
  const S inv = S(1) / std::sqrt(var + eps);
  for (std::size_t j = 0; j < cols; ++j) y[j] = (x[j] - mean) * inv;
  if (inv_std_out) *inv_std_out = inv;
}

// dx_j += inv_std * (dy_j - mean(dy) - y_j * mean(dy * y))
template <typename S>
inline void layernorm_row_grad(const S* y, S inv_std, const S* dy, S* dx,
                               std::size_t cols) {
  S m1 = S(0), m2 = S(0);
  for (std::size_t j = 0; j < cols; ++j) {
    m1 += dy[j];
    m2 += dy[j] * y[j];
  }
  m1 /= static_cast<S>(cols);
  m2 /= static_cast<S>(cols);
  for (std::size_t j = 0; j < cols; ++j)
    dx[j] += inv_std * (dy[j] - m1 - y[j] * m2);
}

template <typename S>
inline void colsum_col(std::size_t j, const S* x, S* out, std::size_t rows,
                       std::size_t cols) {
  S acc = S(0);
  for (std::size_t r = 0; r < rows; ++r) acc += x[r * cols + j];
  out[j] += acc;
}

// Decoupled AdamW single element. step is 1-based at the first update.
template <typename S>
inline void adamw_elem(S& p, S g, S& m, S& v, S lr, S beta1, S beta2, S eps,
                       S weight_decay, S bias1, S bias2) {
  m = beta1 * m + (S(1) - beta1) * g;
  v = beta2 * v + (S(1) - beta2) * g * g;
  const S mhat = m / bias1;
  const S vhat = v / bias2;
  p = p - lr * weight_decay * p - lr * mhat / (std::sqrt(vhat) + eps);
}

}  // namespace sdae::kernels::detail
