#include <cmath>

#include "kernel_detail.hpp"
#include "kernels_special.hpp"
#include "sdae/kernels.hpp"

namespace sdae::kernels::serial {

template <typename S>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const S* a,
             const S* b, S* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    detail::gemm_nn_row(i, n, k, a, b, c, accumulate);
}

template <typename S>
void transpose(const S* src, S* dst, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    detail::transpose_row(r, src, dst, rows, cols);
}

template <typename S>
void add(const S* a, const S* b, S* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename S>
void sub(const S* a, const S* b, S* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename S>
void mul(const S* a, const S* b, S* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename S>
void scale(const S* a, S s, S* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

template <typename S>
void axpy(S alpha, const S* x, S* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename S>
void softmax_rows(const S* x, S* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    special::softmax_row(x + r * cols, y + r * cols, cols);
}

template <typename S>
void softmax_rows_grad(const S* y, const S* dy, S* dx, std::size_t rows,
                       std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    detail::softmax_row_grad(y + r * cols, dy + r * cols, dx + r * cols, cols);
}

template <typename S>
void layernorm_rows(const S* x, S* y, S* inv_std, std::size_t rows,
                    std::size_t cols, S eps) {
  for (std::size_t r = 0; r < rows; ++r)
    detail::layernorm_row(x + r * cols, y + r * cols,
                          inv_std ? inv_std + r : nullptr, cols, eps);
}

template <typename S>
void layernorm_rows_grad(const S* y, const S* inv_std, const S* dy, S* dx,
                         std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    detail::layernorm_row_grad(y + r * cols, inv_std[r], dy + r * cols,
                               dx + r * cols, cols);
}

template <typename S>
void gelu(const S* x, S* y, std::size_t n) {
  special::gelu_fwd(x, y, n);
}

template <typename S>
void gelu_grad(const S* x, const S* dy, S* dx, std::size_t n) {
  special::gelu_bwd(x, dy, dx, n);
}

template <typename S>
void colsum(const S* x, S* out, std::size_t rows, std::size_t cols) {
  for (std::size_t j = 0; j < cols; ++j)
    detail::colsum_col(j, x, out, rows, cols);
}

template <typename S>
void adamw(S* p, const S* g, S* m, S* v, std::size_t n, S lr, S beta1, S beta2,
           S eps, S weight_decay, long long step) {
  const S bias1 = S(1) - std::pow(beta1, static_cast<S>(step));
  const S bias2 = S(1) - std::pow(beta2, static_cast<S>(step));
  for (std::size_t i = 0; i < n; ++i)
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

}  // namespace sdae::kernels::serial

namespace sdae::kernels {

template <typename S>
S sum(const S* x, std::size_t n) {
  S acc = S(0);
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template float sum<float>(const float*, std::size_t);
template double sum<double>(const double*, std::size_t);

}  // namespace sdae::kernels
