#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kernel_detail.hpp"
#include "kernels_special.hpp"
#include "sdae/kernels.hpp"

// Work is split over independent output rows/elements only, so results are
// bitwise equal to the serial variant regardless of thread count. Without
// OpenMP support these compile to plain loops.

namespace sdae::kernels {

bool in_parallel_region() {
#ifdef _OPENMP
  return omp_in_parallel() != 0;
#else
  return false;
#endif
}

}  // namespace sdae::kernels

namespace sdae::kernels::omp {

namespace {
inline int nthreads() { return sdae::threads(); }
}  // namespace

template <typename S>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const S* a,
             const S* b, S* c, bool accumulate) {
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long i = 0; i < static_cast<long long>(m); ++i)
    detail::gemm_nn_row(static_cast<std::size_t>(i), n, k, a, b, c,
                        accumulate);
}

template <typename S>
void transpose(const S* src, S* dst, std::size_t rows, std::size_t cols) {
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long r = 0; r < static_cast<long long>(rows); ++r)
    detail::transpose_row(static_cast<std::size_t>(r), src, dst, rows, cols);
}

template <typename S>
void add(const S* a, const S* b, S* out, std::size_t n) {
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    out[i] = a[i] + b[i];
}

template <typename S>
void sub(const S* a, const S* b, S* out, std::size_t n) {
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    out[i] = a[i] - b[i];
}

template <typename S>
void mul(const S* a, const S* b, S* out, std::size_t n) {
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    out[i] = a[i] * b[i];
}

template <typename S>
void scale(const S* a, S s, S* out, std::size_t n) {
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) out[i] = a[i] * s;
}

template <typename S>
void axpy(S alpha, const S* x, S* y, std::size_t n) {
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    y[i] += alpha * x[i];
}

template <typename S>
void softmax_rows(const S* x, S* y, std::size_t rows, std::size_t cols) {
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long r = 0; r < static_cast<long long>(rows); ++r)
    special::softmax_row(x + r * cols, y + r * cols, cols);
}

template <typename S>
void softmax_rows_grad(const S* y, const S* dy, S* dx, std::size_t rows,
                       std::size_t cols) {
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long r = 0; r < static_cast<long long>(rows); ++r)
    detail::softmax_row_grad(y + r * cols, dy + r * cols, dx + r * cols, cols);
}

template <typename S>
void layernorm_rows(const S* x, S* y, S* inv_std, std::size_t rows,
                    std::size_t cols, S eps) {
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long r = 0; r < static_cast<long long>(rows); ++r)
    detail::layernorm_row(x + r * cols, y + r * cols,
                          inv_std ? inv_std + r : nullptr, cols, eps);
}

template <typename S>
void layernorm_rows_grad(const S* y, const S* inv_std, const S* dy, S* dx,
                         std::size_t rows, std::size_t cols) {
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long r = 0; r < static_cast<long long>(rows); ++r)
    detail::layernorm_row_grad(y + r * cols, inv_std[r], dy + r * cols,
                               dx + r * cols, cols);
}

// Work is split on kSimdAlign boundaries so vector/tail grouping inside the
// special kernels matches a whole-range call element for element.
template <typename S>
void gelu(const S* x, S* y, std::size_t n) {
  const std::size_t w = special::kSimdAlign;
  const long long blocks = static_cast<long long>((n + w - 1) / w);
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long b = 0; b < blocks; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * w;
    special::gelu_fwd(x + lo, y + lo, std::min(w, n - lo));
  }
}

template <typename S>
void gelu_grad(const S* x, const S* dy, S* dx, std::size_t n) {
  const std::size_t w = special::kSimdAlign;
  const long long blocks = static_cast<long long>((n + w - 1) / w);
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long b = 0; b < blocks; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * w;
    special::gelu_bwd(x + lo, dy + lo, dx + lo, std::min(w, n - lo));
  }
}

template <typename S>
void colsum(const S* x, S* out, std::size_t rows, std::size_t cols) {
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long j = 0; j < static_cast<long long>(cols); ++j)
    detail::colsum_col(static_cast<std::size_t>(j), x, out, rows, cols);
}

template <typename S>
void adamw(S* p, const S* g, S* m, S* v, std::size_t n, S lr, S beta1, S beta2,
           S eps, S weight_decay, long long step) {
  const S bias1 = S(1) - std::pow(beta1, static_cast<S>(step));
  const S bias2 = S(1) - std::pow(beta2, static_cast<S>(step));
#pragma omp parallel for num_threads(nthreads()) schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    detail::adamw_elem(p[i], g[i], m[i], v[i], lr, beta1, beta2, eps,
                       weight_decay, bias1, bias2);
}

#define SDAE_INSTANTIATE_KERNELS(S)                                          \
  template void gemm_nn<S>(std::size_t, std::size_t, std::size_t, const S*,  \
                           const S*, S*, bool);                              \
  template void transpose<S>(const S*, S*, std::size_t, std::size_t);        \
  template void add<S>(const S*, const S*, S*, std::size_t);                 \
  template void sub<S>(const S*, const S*, S*, std::size_t);                 \
  template void mul<S>(const S*, const S*, S*, std::size_t);                 \
  template void scale<S>(const S*, S, S*, std::size_t);                      \
  template void axpy<S>(S, const S*, S*, std::size_t);                       \
  template void softmax_rows<S>(const S*, S*, std::size_t, std::size_t);     \
  template void softmax_rows_grad<S>(const S*, const S*, S*, std::size_t,    \
                                     std::size_t);                           \
  template void layernorm_rows<S>(const S*, S*, S*, std::size_t,             \
                                  std::size_t, S);                           \
  template void layernorm_rows_grad<S>(const S*, const S*, const S*, S*,     \
                                       std::size_t, std::size_t);            \
  template void gelu<S>(const S*, S*, std::size_t);                          \
  template void gelu_grad<S>(const S*, const S*, S*, std::size_t);           \
  template void colsum<S>(const S*, S*, std::size_t, std::size_t);           \
  template void adamw<S>(S*, const S*, S*, S*, std::size_t, S, S, S, S, S,   \
                         long long);

SDAE_INSTANTIATE_KERNELS(float)
SDAE_INSTANTIATE_KERNELS(double)

}  // namespace sdae::kernels::omp
