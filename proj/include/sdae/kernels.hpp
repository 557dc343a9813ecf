#pragma once

#include <cstddef>

#include "sdae/common.hpp"

namespace sdae::kernels {

// Raw-buffer compute kernels over row-major contiguous storage. Each kernel
// exists twice: `serial` is the reference implementation, `omp` parallelizes
// over independent output rows/elements with identical per-element
// arithmetic, so the two produce bitwise-equal results for any thread count.
// The unprefixed wrappers dispatch on sdae::threads().
//
// Reductions over a single output (sum) stay serial in both variants; the
// reduction order is part of the contract.

bool in_parallel_region();

namespace serial {

template <typename S>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const S* a,
             const S* b, S* c, bool accumulate);
template <typename S>
void transpose(const S* src, S* dst, std::size_t rows, std::size_t cols);
template <typename S>
void add(const S* a, const S* b, S* out, std::size_t n);
template <typename S>
void sub(const S* a, const S* b, S* out, std::size_t n);
template <typename S>
void mul(const S* a, const S* b, S* out, std::size_t n);
template <typename S>
void scale(const S* a, S s, S* out, std::size_t n);
template <typename S>
void axpy(S alpha, const S* x, S* y, std::size_t n);
template <typename S>
void softmax_rows(const S* x, S* y, std::size_t rows, std::size_t cols);
template <typename S>
void softmax_rows_grad(const S* y, const S* dy, S* dx, std::size_t rows,
                       std::size_t cols);
template <typename S>
void layernorm_rows(const S* x, S* y, S* inv_std, std::size_t rows,
                    std::size_t cols, S eps);
template <typename S>
void layernorm_rows_grad(const S* y, const S* inv_std, const S* dy, S* dx,
                         std::size_t rows, std::size_t cols);
template <typename S>
void gelu(const S* x, S* y, std::size_t n);
template <typename S>
void gelu_grad(const S* x, const S* dy, S* dx, std::size_t n);
template <typename S>
void colsum(const S* x, S* out, std::size_t rows, std::size_t cols);
template <typename S>
void adamw(S* p, const S* g, S* m, S* v, std::size_t n, S lr, S beta1, S beta2,
           S eps, S weight_decay, long long step);

}  // namespace serial

namespace omp {

template <typename S>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const S* a,
             const S* b, S* c, bool accumulate);
template <typename S>
void transpose(const S* src, S* dst, std::size_t rows, std::size_t cols);
template <typename S>
void add(const S* a, const S* b, S* out, std::size_t n);
template <typename S>
void sub(const S* a, const S* b, S* out, std::size_t n);
template <typename S>
void mul(const S* a, const S* b, S* out, std::size_t n);
template <typename S>
void scale(const S* a, S s, S* out, std::size_t n);
template <typename S>
void axpy(S alpha, const S* x, S* y, std::size_t n);
template <typename S>
void softmax_rows(const S* x, S* y, std::size_t rows, std::size_t cols);
template <typename S>
void softmax_rows_grad(const S* y, const S* dy, S* dx, std::size_t rows,
                       std::size_t cols);
template <typename S>
void layernorm_rows(const S* x, S* y, S* inv_std, std::size_t rows,
                    std::size_t cols, S eps);
template <typename S>
void layernorm_rows_grad(const S* y, const S* inv_std, const S* dy, S* dx,
                         std::size_t rows, std::size_t cols);
template <typename S>
void gelu(const S* x, S* y, std::size_t n);
template <typename S>
void gelu_grad(const S* x, const S* dy, S* dx, std::size_t n);
template <typename S>
void colsum(const S* x, S* out, std::size_t rows, std::size_t cols);
template <typename S>
void adamw(S* p, const S* g, S* m, S* v, std::size_t n, S lr, S beta1, S beta2,
           S eps, S weight_decay, long long step);

}  // namespace omp

// Serial in both variants: one scalar output, fixed ascending order.
template <typename S>
S sum(const S* x, std::size_t n);

namespace detail {
inline bool use_omp(std::size_t independent_items) {
  return sdae::threads() > 1 && independent_items > 1 && !in_parallel_region();
}
}  // namespace detail

template <typename S>
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const S* a,
                    const S* b, S* c, bool accumulate) {
  if (detail::use_omp(m))
    omp::gemm_nn(m, n, k, a, b, c, accumulate);
  else
    serial::gemm_nn(m, n, k, a, b, c, accumulate);
}

template <typename S>
inline void transpose(const S* src, S* dst, std::size_t rows,
                      std::size_t cols) {
  if (detail::use_omp(rows))
    omp::transpose(src, dst, rows, cols);
  else
    serial::transpose(src, dst, rows, cols);
}

template <typename S>
inline void add(const S* a, const S* b, S* out, std::size_t n) {
  if (detail::use_omp(n / 4096))
    omp::add(a, b, out, n);
  else
    serial::add(a, b, out, n);
}

template <typename S>
inline void sub(const S* a, const S* b, S* out, std::size_t n) {
  if (detail::use_omp(n / 4096))
    omp::sub(a, b, out, n);
  else
    serial::sub(a, b, out, n);
}

template <typename S>
inline void mul(const S* a, const S* b, S* out, std::size_t n) {
  if (detail::use_omp(n / 4096))
    omp::mul(a, b, out, n);
  else
    serial::mul(a, b, out, n);
}

template <typename S>
inline void scale(const S* a, S s, S* out, std::size_t n) {
  if (detail::use_omp(n / 4096))
    omp::scale(a, s, out, n);
  else
    serial::scale(a, s, out, n);
}

template <typename S>
inline void axpy(S alpha, const S* x, S* y, std::size_t n) {
  if (detail::use_omp(n / 4096))
    omp::axpy(alpha, x, y, n);
  else
    serial::axpy(alpha, x, y, n);
}

template <typename S>
inline void softmax_rows(const S* x, S* y, std::size_t rows,
                         std::size_t cols) {
  if (detail::use_omp(rows))
    omp::softmax_rows(x, y, rows, cols);
  else
    serial::softmax_rows(x, y, rows, cols);
}

template <typename S>
inline void softmax_rows_grad(const S* y, const S* dy, S* dx, std::size_t rows,
                              std::size_t cols) {
  if (detail::use_omp(rows))
    omp::softmax_rows_grad(y, dy, dx, rows, cols);
  else
    serial::softmax_rows_grad(y, dy, dx, rows, cols);
}

template <typename S>
inline void layernorm_rows(const S* x, S* y, S* inv_std, std::size_t rows,
                           std::size_t cols, S eps) {
  if (detail::use_omp(rows))
    omp::layernorm_rows(x, y, inv_std, rows, cols, eps);
  else
    serial::layernorm_rows(x, y, inv_std, rows, cols, eps);
}

template <typename S>
inline void layernorm_rows_grad(const S* y, const S* inv_std, const S* dy,
                                S* dx, std::size_t rows, std::size_t cols) {
  if (detail::use_omp(rows))
    omp::layernorm_rows_grad(y, inv_std, dy, dx, rows, cols);
  else
    serial::layernorm_rows_grad(y, inv_std, dy, dx, rows, cols);
}

template <typename S>
inline void gelu(const S* x, S* y, std::size_t n) {
  if (detail::use_omp(n / 1024))
    omp::gelu(x, y, n);
  else
    serial::gelu(x, y, n);
}

template <typename S>
inline void gelu_grad(const S* x, const S* dy, S* dx, std::size_t n) {
  if (detail::use_omp(n / 1024))
    omp::gelu_grad(x, dy, dx, n);
  else
    serial::gelu_grad(x, dy, dx, n);
}

template <typename S>
inline void colsum(const S* x, S* out, std::size_t rows, std::size_t cols) {
  if (detail::use_omp(cols))
    omp::colsum(x, out, rows, cols);
  else
    serial::colsum(x, out, rows, cols);
}

template <typename S>
inline void adamw(S* p, const S* g, S* m, S* v, std::size_t n, S lr, S beta1,
                  S beta2, S eps, S weight_decay, long long step) {
  if (detail::use_omp(n / 4096))
    omp::adamw(p, g, m, v, n, lr, beta1, beta2, eps, weight_decay, step);
  else
    serial::adamw(p, g, m, v, n, lr, beta1, beta2, eps, weight_decay, step);
}

}  // namespace sdae::kernels
