#pragma once

#include <vector>

#include "sdae/tensor.hpp"

namespace sdae::ops {

// Differentiable operations. Forward values are computed immediately via the
// kernel layer; when a tape is active and an input participates in
// differentiation, a backward record is appended. With no active tape these
// are plain functions (the teacher branch and evaluation run that way).
//
// Elementwise ops accept any rank; "last axis" ops treat the tensor as
// rows x cols with cols = trailing dimension; everything indexed by rows or
// columns is strictly 2-D.

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b);
template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b);
template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b);
template <typename S>
TensorT<S> scale(const TensorT<S>& a, S factor);

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b);
template <typename S>
TensorT<S> transpose(const TensorT<S>& a);
template <typename S>
TensorT<S> reshape(const TensorT<S>& a, std::vector<std::size_t> shape);

template <typename S>
TensorT<S> softmax(const TensorT<S>& a);
template <typename S>
TensorT<S> layernorm(const TensorT<S>& a, S eps);
template <typename S>
TensorT<S> gelu(const TensorT<S>& a);

// x: [R x D], v: [D] or [1 x D].
template <typename S>
TensorT<S> add_rowvec(const TensorT<S>& x, const TensorT<S>& v);
template <typename S>
TensorT<S> mul_rowvec(const TensorT<S>& x, const TensorT<S>& v);
template <typename S>
TensorT<S> broadcast_row(const TensorT<S>& v, std::size_t n_rows);

template <typename S>
TensorT<S> select_rows(const TensorT<S>& x, const std::vector<std::size_t>& idx);
// Copy of base with row idx[j] replaced by src row j. Indices must be unique.
template <typename S>
TensorT<S> scatter_rows(const TensorT<S>& base,
                        const std::vector<std::size_t>& idx,
                        const TensorT<S>& src);
template <typename S>
TensorT<S> slice_rows(const TensorT<S>& x, std::size_t row0, std::size_t len);
template <typename S>
TensorT<S> slice_cols(const TensorT<S>& x, std::size_t col0, std::size_t len);
template <typename S>
TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts);
template <typename S>
TensorT<S> concat_cols(const std::vector<TensorT<S>>& parts);

template <typename S>
TensorT<S> sum(const TensorT<S>& a);

// Mean over rows of (1 - cos(pred_i, target_i)); gradients flow to pred
// only. Row norms are guarded below by `guard`. With per_token=false the
// two matrices are compared as single flattened vectors instead.
template <typename S>
TensorT<S> cosine_loss(const TensorT<S>& pred, const TensorT<S>& target,
                       S guard, bool per_token);

// Mean negative log-likelihood of labels under row-wise softmax.
template <typename S>
TensorT<S> softmax_cross_entropy(const TensorT<S>& logits,
                                 const std::vector<std::size_t>& labels);

}  // namespace sdae::ops
