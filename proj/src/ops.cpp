#include "sdae/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "sdae/kernels.hpp"

namespace sdae::ops {

namespace {

template <typename S>
std::pair<std::size_t, std::size_t> last_axis_view(const char* op,
                                                   const TensorT<S>& t) {
  if (t.ndim() < 1) throw ShapeError(std::string(op) + ": rank-0 tensor");
  const std::size_t cols = t.shape().back();
  return {t.size() / cols, cols};
}

template <typename S>
void require_matrix(const char* op, const TensorT<S>& t) {
  if (t.ndim() != 2)
    throw ShapeError(std::string(op) + ": expected a matrix, got " +
                     shape_str(t.shape()));
}

template <typename S>
void require_same_shape(const char* op, const TensorT<S>& a,
                        const TensorT<S>& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <typename S>
std::size_t rowvec_dim(const char* op, const TensorT<S>& v) {
  if (v.ndim() == 1) return v.shape()[0];
  if (v.ndim() == 2 && v.shape()[0] == 1) return v.shape()[1];
  throw ShapeError(std::string(op) + ": expected a row vector, got " +
                   shape_str(v.shape()));
}

template <typename S>
void finish(const char* op, std::initializer_list<const TensorT<S>*> inputs,
            TensorT<S>& out, std::function<void()> apply) {
  if (check_finite() && !out.all_finite())
    throw TrainingError(std::string(op) + ": non-finite output");
  auto* tape = active_tape<S>();
  if (!tape) return;
  bool participates = false;
  for (const auto* t : inputs) participates |= t->requires_grad();
  if (!participates) return;
  out.set_requires_grad(true);
  tape->record(op, out.node(), std::move(apply));
}

}  // namespace

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  require_same_shape("add", a, b);
  auto out = TensorT<S>::zeros(a.shape());
  kernels::add(a.ptr(), b.ptr(), out.ptr(), out.size());
  finish<S>("add", {&a, &b}, out, [an = a.node(), bn = b.node(),
                                   on = out.node()] {
    const S* dy = on->grad->data();
    const std::size_t n = on->data.size();
    if (an->requires_grad) kernels::axpy(S(1), dy, an->ensure_grad().data(), n);
    if (bn->requires_grad) kernels::axpy(S(1), dy, bn->ensure_grad().data(), n);
  });
  return out;
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  require_same_shape("sub", a, b);
  auto out = TensorT<S>::zeros(a.shape());
  kernels::sub(a.ptr(), b.ptr(), out.ptr(), out.size());
  finish<S>("sub", {&a, &b}, out, [an = a.node(), bn = b.node(),
                                   on = out.node()] {
    const S* dy = on->grad->data();
    const std::size_t n = on->data.size();
    if (an->requires_grad) kernels::axpy(S(1), dy, an->ensure_grad().data(), n);
    if (bn->requires_grad)
      kernels::axpy(S(-1), dy, bn->ensure_grad().data(), n);
  });
  return out;
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  require_same_shape("mul", a, b);
  auto out = TensorT<S>::zeros(a.shape());
  kernels::mul(a.ptr(), b.ptr(), out.ptr(), out.size());
  finish<S>("mul", {&a, &b}, out, [an = a.node(), bn = b.node(),
                                   on = out.node()] {
    const S* dy = on->grad->data();
    const std::size_t n = on->data.size();
    if (an->requires_grad) {
      S* da = an->ensure_grad().data();
      const S* bv = bn->data.data();
      for (std::size_t i = 0; i < n; ++i) da[i] += dy[i] * bv[i];
    }
    if (bn->requires_grad) {
      S* db = bn->ensure_grad().data();
      const S* av = an->data.data();
      for (std::size_t i = 0; i < n; ++i) db[i] += dy[i] * av[i];
    }
  });
  return out;
}

template <typename S>
TensorT<S> scale(const TensorT<S>& a, S factor) {
  auto out = TensorT<S>::zeros(a.shape());
  kernels::scale(a.ptr(), factor, out.ptr(), out.size());
  finish<S>("scale", {&a}, out, [an = a.node(), on = out.node(), factor] {
    if (an->requires_grad)
      kernels::axpy(factor, on->grad->data(), an->ensure_grad().data(),
                    on->data.size());
  });
  return out;
}

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  auto out = TensorT<S>::zeros({m, n});
  kernels::gemm_nn(m, n, k, a.ptr(), b.ptr(), out.ptr(), false);
  finish<S>("matmul", {&a, &b}, out,
            [an = a.node(), bn = b.node(), on = out.node(), m, k, n] {
              const S* dy = on->grad->data();
              if (an->requires_grad) {
                // dA += dY * B^T
                std::vector<S> bt(k * n);
                kernels::transpose(bn->data.data(), bt.data(), k, n);
                kernels::gemm_nn(m, k, n, dy, bt.data(),
                                 an->ensure_grad().data(), true);
              }
              if (bn->requires_grad) {
                // dB += A^T * dY
                std::vector<S> at(m * k);
                kernels::transpose(an->data.data(), at.data(), m, k);
                kernels::gemm_nn(k, n, m, at.data(), dy,
                                 bn->ensure_grad().data(), true);
              }
            });
  return out;
}

template <typename S>
TensorT<S> transpose(const TensorT<S>& a) {
  require_matrix("transpose", a);
  const std::size_t r = a.rows(), c = a.cols();
  auto out = TensorT<S>::zeros({c, r});
  kernels::transpose(a.ptr(), out.ptr(), r, c);
  finish<S>("transpose", {&a}, out, [an = a.node(), on = out.node(), r, c] {
    if (!an->requires_grad) return;
    std::vector<S> scratch(r * c);
    kernels::transpose(on->grad->data(), scratch.data(), c, r);
    kernels::axpy(S(1), scratch.data(), an->ensure_grad().data(), r * c);
  });
  return out;
}

template <typename S>
TensorT<S> reshape(const TensorT<S>& a, std::vector<std::size_t> shape) {
  auto out = TensorT<S>::from_data(std::move(shape), a.data());
  finish<S>("reshape", {&a}, out, [an = a.node(), on = out.node()] {
    if (an->requires_grad)
      kernels::axpy(S(1), on->grad->data(), an->ensure_grad().data(),
                    on->data.size());
  });
  return out;
}

template <typename S>
TensorT<S> softmax(const TensorT<S>& a) {
  auto [rows, cols] = last_axis_view("softmax", a);
  auto out = TensorT<S>::zeros(a.shape());
  kernels::softmax_rows(a.ptr(), out.ptr(), rows, cols);
  finish<S>("softmax", {&a}, out,
            [an = a.node(), on = out.node(), rows = rows, cols = cols] {
              if (an->requires_grad)
                kernels::softmax_rows_grad(on->data.data(), on->grad->data(),
                                           an->ensure_grad().data(), rows,
                                           cols);
            });
  return out;
}

template <typename S>
TensorT<S> layernorm(const TensorT<S>& a, S eps) {
  auto [rows, cols] = last_axis_view("layernorm", a);
  if (cols < 1) throw ShapeError("layernorm: empty rows");
  auto out = TensorT<S>::zeros(a.shape());
  std::vector<S> inv_std(rows);
  kernels::layernorm_rows(a.ptr(), out.ptr(), inv_std.data(), rows, cols, eps);
  finish<S>("layernorm", {&a}, out,
            [an = a.node(), on = out.node(), inv = std::move(inv_std),
             rows = rows, cols = cols] {
              if (an->requires_grad)
                kernels::layernorm_rows_grad(on->data.data(), inv.data(),
                                             on->grad->data(),
                                             an->ensure_grad().data(), rows,
                                             cols);
            });
  return out;
}

template <typename S>
TensorT<S> gelu(const TensorT<S>& a) {
  auto out = TensorT<S>::zeros(a.shape());
  kernels::gelu(a.ptr(), out.ptr(), out.size());
  finish<S>("gelu", {&a}, out, [an = a.node(), on = out.node()] {
    if (an->requires_grad)
      kernels::gelu_grad(an->data.data(), on->grad->data(),
                         an->ensure_grad().data(), on->data.size());
  });
  return out;
}

template <typename S>
TensorT<S> add_rowvec(const TensorT<S>& x, const TensorT<S>& v) {
  require_matrix("add_rowvec", x);
  const std::size_t d = rowvec_dim("add_rowvec", v);
  if (d != x.cols())
    throw ShapeError("add_rowvec: vector length " + std::to_string(d) +
                     " vs matrix " + shape_str(x.shape()));
  const std::size_t r = x.rows();
  auto out = TensorT<S>::zeros(x.shape());
  const S* xs = x.ptr();
  const S* vs = v.ptr();
  S* os = out.ptr();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < d; ++j) os[i * d + j] = xs[i * d + j] + vs[j];
  finish<S>("add_rowvec", {&x, &v}, out,
            [xn = x.node(), vn = v.node(), on = out.node(), r, d] {
              const S* dy = on->grad->data();
              if (xn->requires_grad)
                kernels::axpy(S(1), dy, xn->ensure_grad().data(), r * d);
              if (vn->requires_grad)
                kernels::colsum(dy, vn->ensure_grad().data(), r, d);
            });
  return out;
}

template <typename S>
TensorT<S> mul_rowvec(const TensorT<S>& x, const TensorT<S>& v) {
  require_matrix("mul_rowvec", x);
  const std::size_t d = rowvec_dim("mul_rowvec", v);
  if (d != x.cols())
    throw ShapeError("mul_rowvec: vector length " + std::to_string(d) +
                     " vs matrix " + shape_str(x.shape()));
  const std::size_t r = x.rows();
  auto out = TensorT<S>::zeros(x.shape());
  const S* xs = x.ptr();
  const S* vs = v.ptr();
  S* os = out.ptr();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < d; ++j) os[i * d + j] = xs[i * d + j] * vs[j];
  finish<S>("mul_rowvec", {&x, &v}, out,
            [xn = x.node(), vn = v.node(), on = out.node(), r, d] {
              const S* dy = on->grad->data();
              if (xn->requires_grad) {
                S* dx = xn->ensure_grad().data();
                const S* vv = vn->data.data();
                for (std::size_t i = 0; i < r; ++i)
                  for (std::size_t j = 0; j < d; ++j)
                    dx[i * d + j] += dy[i * d + j] * vv[j];
              }
              if (vn->requires_grad) {
                S* dv = vn->ensure_grad().data();
                const S* xv = xn->data.data();
                for (std::size_t j = 0; j < d; ++j) {
                  S acc = S(0);
                  for (std::size_t i = 0; i < r; ++i)
                    acc += dy[i * d + j] * xv[i * d + j];
                  dv[j] += acc;
                }
              }
            });
  return out;
}

template <typename S>
TensorT<S> broadcast_row(const TensorT<S>& v, std::size_t n_rows) {
  const std::size_t d = rowvec_dim("broadcast_row", v);
  if (n_rows == 0) throw ShapeError("broadcast_row: zero rows");
  auto out = TensorT<S>::zeros({n_rows, d});
  S* os = out.ptr();
  for (std::size_t i = 0; i < n_rows; ++i)
    std::memcpy(os + i * d, v.ptr(), d * sizeof(S));
  finish<S>("broadcast_row", {&v}, out,
            [vn = v.node(), on = out.node(), n_rows, d] {
              if (vn->requires_grad)
                kernels::colsum(on->grad->data(), vn->ensure_grad().data(),
                                n_rows, d);
            });
  return out;
}

template <typename S>
TensorT<S> select_rows(const TensorT<S>& x,
                       const std::vector<std::size_t>& idx) {
  require_matrix("select_rows", x);
  if (idx.empty()) throw ShapeError("select_rows: empty index list");
  const std::size_t d = x.cols();
  for (std::size_t i : idx)
    if (i >= x.rows())
      throw ShapeError("select_rows: index " + std::to_string(i) +
                       " out of range for " + shape_str(x.shape()));
  auto out = TensorT<S>::zeros({idx.size(), d});
  S* os = out.ptr();
  const S* xs = x.ptr();
  for (std::size_t j = 0; j < idx.size(); ++j)
    std::memcpy(os + j * d, xs + idx[j] * d, d * sizeof(S));
  finish<S>("select_rows", {&x}, out,
            [xn = x.node(), on = out.node(), idx, d] {
              if (!xn->requires_grad) return;
              S* dx = xn->ensure_grad().data();
              const S* dy = on->grad->data();
              for (std::size_t j = 0; j < idx.size(); ++j)
                for (std::size_t c = 0; c < d; ++c)
                  dx[idx[j] * d + c] += dy[j * d + c];
            });
  return out;
}

template <typename S>
TensorT<S> scatter_rows(const TensorT<S>& base,
                        const std::vector<std::size_t>& idx,
                        const TensorT<S>& src) {
  require_matrix("scatter_rows", base);
  require_matrix("scatter_rows", src);
  if (idx.size() != src.rows())
    throw ShapeError("scatter_rows: " + std::to_string(idx.size()) +
                     " indices vs source " + shape_str(src.shape()));
  if (base.cols() != src.cols())
    throw ShapeError("scatter_rows: column mismatch " +
                     shape_str(base.shape()) + " vs " +
                     shape_str(src.shape()));
  std::unordered_set<std::size_t> seen;
  for (std::size_t i : idx) {
    if (i >= base.rows())
      throw ShapeError("scatter_rows: index " + std::to_string(i) +
                       " out of range for " + shape_str(base.shape()));
    if (!seen.insert(i).second)
      throw ContractError("scatter_rows: duplicate index " +
                          std::to_string(i));
  }
  const std::size_t d = base.cols();
  auto out = TensorT<S>::from_data(base.shape(), base.data());
  S* os = out.ptr();
  const S* ss = src.ptr();
  for (std::size_t j = 0; j < idx.size(); ++j)
    std::memcpy(os + idx[j] * d, ss + j * d, d * sizeof(S));
  finish<S>("scatter_rows", {&base, &src}, out,
            [bn = base.node(), sn = src.node(), on = out.node(), idx, d] {
              const S* dy = on->grad->data();
              if (bn->requires_grad) {
                // Rows that were overwritten contribute nothing to base.
                std::vector<char> overwritten(bn->data.size() / d, 0);
                for (std::size_t i : idx) overwritten[i] = 1;
                S* db = bn->ensure_grad().data();
                for (std::size_t r = 0; r < overwritten.size(); ++r)
                  if (!overwritten[r])
                    for (std::size_t c = 0; c < d; ++c)
                      db[r * d + c] += dy[r * d + c];
              }
              if (sn->requires_grad) {
                S* ds = sn->ensure_grad().data();
                for (std::size_t j = 0; j < idx.size(); ++j)
                  for (std::size_t c = 0; c < d; ++c)
                    ds[j * d + c] += dy[idx[j] * d + c];
              }
            });
  return out;
}

template <typename S>
TensorT<S> slice_rows(const TensorT<S>& x, std::size_t row0, std::size_t len) {
  require_matrix("slice_rows", x);
  if (len == 0 || row0 + len > x.rows())
    throw ShapeError("slice_rows: range [" + std::to_string(row0) + ", " +
                     std::to_string(row0 + len) + ") out of " +
                     shape_str(x.shape()));
  const std::size_t d = x.cols();
  auto out = TensorT<S>::zeros({len, d});
  std::memcpy(out.ptr(), x.ptr() + row0 * d, len * d * sizeof(S));
  finish<S>("slice_rows", {&x}, out,
            [xn = x.node(), on = out.node(), row0, len, d] {
              if (xn->requires_grad)
                kernels::axpy(S(1), on->grad->data(),
                              xn->ensure_grad().data() + row0 * d, len * d);
            });
  return out;
}

template <typename S>
TensorT<S> slice_cols(const TensorT<S>& x, std::size_t col0, std::size_t len) {
  require_matrix("slice_cols", x);
  if (len == 0 || col0 + len > x.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(col0) + ", " +
                     std::to_string(col0 + len) + ") out of " +
                     shape_str(x.shape()));
  const std::size_t r = x.rows(), d = x.cols();
  auto out = TensorT<S>::zeros({r, len});
  S* os = out.ptr();
  const S* xs = x.ptr();
  for (std::size_t i = 0; i < r; ++i)
    std::memcpy(os + i * len, xs + i * d + col0, len * sizeof(S));
  finish<S>("slice_cols", {&x}, out,
            [xn = x.node(), on = out.node(), col0, len, r, d] {
              if (!xn->requires_grad) return;
              S* dx = xn->ensure_grad().data();
              const S* dy = on->grad->data();
              for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < len; ++j)
                  dx[i * d + col0 + j] += dy[i * len + j];
            });
  return out;
}

template <typename S>
TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  const std::size_t d = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix("concat_rows", p);
    if (p.cols() != d)
      throw ShapeError("concat_rows: column mismatch " +
                       shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    total += p.rows();
  }
  auto out = TensorT<S>::zeros({total, d});
  S* os = out.ptr();
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::memcpy(os + off, p.ptr(), p.size() * sizeof(S));
    off += p.size();
  }
  std::vector<std::shared_ptr<detail::NodeT<S>>> nodes;
  bool participates = false;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    participates |= p.requires_grad();
  }
  auto* tape = active_tape<S>();
  if (check_finite() && !out.all_finite())
    throw TrainingError("concat_rows: non-finite output");
  if (tape && participates) {
    out.set_requires_grad(true);
    tape->record("concat_rows", out.node(),
                 [nodes = std::move(nodes), on = out.node()] {
                   const S* dy = on->grad->data();
                   std::size_t off2 = 0;
                   for (const auto& nd : nodes) {
                     if (nd->requires_grad)
                       kernels::axpy(S(1), dy + off2,
                                     nd->ensure_grad().data(),
                                     nd->data.size());
                     off2 += nd->data.size();
                   }
                 });
  }
  return out;
}

template <typename S>
TensorT<S> concat_cols(const std::vector<TensorT<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix("concat_cols", p);
    if (p.rows() != r)
      throw ShapeError("concat_cols: row mismatch " +
                       shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    total += p.cols();
  }
  auto out = TensorT<S>::zeros({r, total});
  S* os = out.ptr();
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p.cols();
    const S* ps = p.ptr();
    for (std::size_t i = 0; i < r; ++i)
      std::memcpy(os + i * total + off, ps + i * pc, pc * sizeof(S));
    off += pc;
  }
  std::vector<std::shared_ptr<detail::NodeT<S>>> nodes;
  std::vector<std::size_t> widths;
  bool participates = false;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    widths.push_back(p.cols());
    participates |= p.requires_grad();
  }
  if (check_finite() && !out.all_finite())
    throw TrainingError("concat_cols: non-finite output");
  auto* tape = active_tape<S>();
  if (tape && participates) {
    out.set_requires_grad(true);
    tape->record("concat_cols", out.node(),
                 [nodes = std::move(nodes), widths = std::move(widths),
                  on = out.node(), r, total] {
                   const S* dy = on->grad->data();
                   std::size_t off2 = 0;
                   for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                     const std::size_t w = widths[pi];
                     if (nodes[pi]->requires_grad) {
                       S* dp = nodes[pi]->ensure_grad().data();
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < w; ++j)
                           dp[i * w + j] += dy[i * total + off2 + j];
                     }
                     off2 += w;
                   }
                 });
  }
  return out;
}

template <typename S>
TensorT<S> sum(const TensorT<S>& a) {
  auto out = TensorT<S>::scalar(kernels::sum(a.ptr(), a.size()));
  finish<S>("sum", {&a}, out, [an = a.node(), on = out.node()] {
    if (!an->requires_grad) return;
    const S g = (*on->grad)[0];
    S* da = an->ensure_grad().data();
    for (std::size_t i = 0; i < an->data.size(); ++i) da[i] += g;
  });
  return out;
}

template <typename S>
TensorT<S> cosine_loss(const TensorT<S>& pred, const TensorT<S>& target,
                       S guard, bool per_token) {
  require_same_shape("cosine_loss", pred, target);
  require_matrix("cosine_loss", pred);
  if (guard <= S(0)) throw ContractError("cosine_loss: guard must be > 0");
  const std::size_t n_rows = per_token ? pred.rows() : 1;
  const std::size_t d = pred.size() / n_rows;

  std::vector<S> dots(n_rows), np(n_rows), nt(n_rows);
  const S* ps = pred.ptr();
  const S* ts = target.ptr();
  S loss = S(0);
  for (std::size_t i = 0; i < n_rows; ++i) {
    S dot = S(0), pp = S(0), tt = S(0);
    const S* p = ps + i * d;
    const S* t = ts + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      dot += p[j] * t[j];
      pp += p[j] * p[j];
      tt += t[j] * t[j];
    }
    dots[i] = dot;
    np[i] = std::max(std::sqrt(pp), guard);
    nt[i] = std::max(std::sqrt(tt), guard);
    loss += S(1) - dot / (np[i] * nt[i]);
  }
  loss /= static_cast<S>(n_rows);
  auto out = TensorT<S>::scalar(loss);
  finish<S>("cosine_loss", {&pred}, out,
            [pn = pred.node(), tn = target.node(), on = out.node(),
             dots = std::move(dots), np = std::move(np), nt = std::move(nt),
             n_rows, d, guard] {
              if (!pn->requires_grad) return;
              const S g = (*on->grad)[0] / static_cast<S>(n_rows);
              S* dp = pn->ensure_grad().data();
              const S* p = pn->data.data();
              const S* t = tn->data.data();
              for (std::size_t i = 0; i < n_rows; ++i) {
                const S inv_pt = S(1) / (np[i] * nt[i]);
                const S s = dots[i] * inv_pt;
                const bool live = np[i] > guard;
                const S inv_pp = live ? S(1) / (np[i] * np[i]) : S(0);
                for (std::size_t j = 0; j < d; ++j) {
                  const S ds = t[i * d + j] * inv_pt - s * p[i * d + j] * inv_pp;
                  dp[i * d + j] += -g * ds;
                }
              }
            });
  return out;
}

template <typename S>
TensorT<S> softmax_cross_entropy(const TensorT<S>& logits,
                                 const std::vector<std::size_t>& labels) {
  require_matrix("softmax_cross_entropy", logits);
  if (labels.size() != logits.rows())
    throw ShapeError("softmax_cross_entropy: " +
                     std::to_string(labels.size()) + " labels vs logits " +
                     shape_str(logits.shape()));
  const std::size_t r = logits.rows(), k = logits.cols();
  for (std::size_t y : labels)
    if (y >= k)
      throw ContractError("softmax_cross_entropy: label " + std::to_string(y) +
                          " out of range for " + std::to_string(k) +
                          " classes");
  const S* ls = logits.ptr();
  S loss = S(0);
  for (std::size_t i = 0; i < r; ++i) {
    const S* row = ls + i * k;
    S mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    S z = S(0);
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    loss += mx + std::log(z) - row[labels[i]];
  }
  loss /= static_cast<S>(r);
  auto out = TensorT<S>::scalar(loss);
  finish<S>("softmax_cross_entropy", {&logits}, out,
            [ln = logits.node(), on = out.node(), labels, r, k] {
              if (!ln->requires_grad) return;
              const S g = (*on->grad)[0] / static_cast<S>(r);
              S* dl = ln->ensure_grad().data();
              const S* lv = ln->data.data();
              std::vector<S> prob(k);
              for (std::size_t i = 0; i < r; ++i) {
                kernels::serial::softmax_rows(lv + i * k, prob.data(), 1, k);
                for (std::size_t j = 0; j < k; ++j) {
                  const S ind = j == labels[i] ? S(1) : S(0);
                  dl[i * k + j] += g * (prob[j] - ind);
                }
              }
            });
  return out;
}

#define SDAE_INSTANTIATE_OPS(S)                                               \
  template TensorT<S> add<S>(const TensorT<S>&, const TensorT<S>&);           \
  template TensorT<S> sub<S>(const TensorT<S>&, const TensorT<S>&);           \
  template TensorT<S> mul<S>(const TensorT<S>&, const TensorT<S>&);           \
  template TensorT<S> scale<S>(const TensorT<S>&, S);                         \
  template TensorT<S> matmul<S>(const TensorT<S>&, const TensorT<S>&);        \
  template TensorT<S> transpose<S>(const TensorT<S>&);                        \
  template TensorT<S> reshape<S>(const TensorT<S>&,                           \
                                 std::vector<std::size_t>);                   \
  template TensorT<S> softmax<S>(const TensorT<S>&);                          \
  template TensorT<S> layernorm<S>(const TensorT<S>&, S);                     \
  template TensorT<S> gelu<S>(const TensorT<S>&);                             \
  template TensorT<S> add_rowvec<S>(const TensorT<S>&, const TensorT<S>&);    \
  template TensorT<S> mul_rowvec<S>(const TensorT<S>&, const TensorT<S>&);    \
  template TensorT<S> broadcast_row<S>(const TensorT<S>&, std::size_t);       \
  template TensorT<S> select_rows<S>(const TensorT<S>&,                       \
                                     const std::vector<std::size_t>&);        \
  template TensorT<S> scatter_rows<S>(const TensorT<S>&,                      \
                                      const std::vector<std::size_t>&,        \
                                      const TensorT<S>&);                     \
  template TensorT<S> slice_rows<S>(const TensorT<S>&, std::size_t,           \
                                    std::size_t);                             \
  template TensorT<S> slice_cols<S>(const TensorT<S>&, std::size_t,           \
                                    std::size_t);                             \
  template TensorT<S> concat_rows<S>(const std::vector<TensorT<S>>&);         \
  template TensorT<S> concat_cols<S>(const std::vector<TensorT<S>>&);         \
  template TensorT<S> sum<S>(const TensorT<S>&);                              \
  template TensorT<S> cosine_loss<S>(const TensorT<S>&, const TensorT<S>&, S, \
                                     bool);                                   \
  template TensorT<S> softmax_cross_entropy<S>(                               \
      const TensorT<S>&, const std::vector<std::size_t>&);

SDAE_INSTANTIATE_OPS(float)
SDAE_INSTANTIATE_OPS(double)

}  // namespace sdae::ops
