#include "kernels_special.hpp"

#include <cmath>

namespace sdae::kernels::special {

template <typename S>
void gelu_fwd(const S* __restrict x, S* __restrict y, std::size_t n) {
  const S inv_sqrt2 = S(0.70710678118654752440L);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = S(0.5) * x[i] * (S(1) + std::erf(x[i] * inv_sqrt2));
}

template <typename S>
void gelu_bwd(const S* __restrict x, const S* __restrict dy, S* __restrict dx,
              std::size_t n) {
  const S inv_sqrt2 = S(0.70710678118654752440L);
  const S inv_sqrt2pi = S(0.39894228040143267794L);
  for (std::size_t i = 0; i < n; ++i) {
    const S cdf = S(0.5) * (S(1) + std::erf(x[i] * inv_sqrt2));
    const S pdf = inv_sqrt2pi * std::exp(S(-0.5) * x[i] * x[i]);
    dx[i] += dy[i] * (cdf + x[i] * pdf);
  }
}

template <typename S>
void softmax_row(const S* __restrict x, S* __restrict y, std::size_t cols) {
  S mx = x[0];
  for (std::size_t j = 1; j < cols; ++j)
    if (x[j] > mx) mx = x[j];
  S total = S(0);
  for (std::size_t j = 0; j < cols; ++j) {
    y[j] = std::exp(x[j] - mx);
    total += y[j];
  }
  const S inv = S(1) / total;
  for (std::size_t j = 0; j < cols; ++j) y[j] *= inv;
}

#define SDAE_INSTANTIATE_SPECIAL(S)                                \
  template void gelu_fwd<S>(const S*, S*, std::size_t);            \
  template void gelu_bwd<S>(const S*, const S*, S*, std::size_t);  \
  template void softmax_row<S>(const S*, S*, std::size_t);

SDAE_INSTANTIATE_SPECIAL(float)
SDAE_INSTANTIATE_SPECIAL(double)

}  // namespace sdae::kernels::special
