#include "sdae/tensor.hpp"

#include <cmath>
#include <cstring>

namespace sdae {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor: zero-sized dimension");
    n *= d;
  }
  return n;
}

}  // namespace

template <typename S>
detail::NodeT<S>& TensorT<S>::ref() const {
  if (!node_) throw ContractError("tensor: use of an undefined tensor");
  return *node_;
}

template <typename S>
TensorT<S> TensorT<S>::zeros(std::vector<std::size_t> shape) {
  auto n = std::make_shared<detail::NodeT<S>>();
  n->data.assign(shape_numel(shape), S(0));
  n->shape = std::move(shape);
  return TensorT(std::move(n));
}

template <typename S>
TensorT<S> TensorT<S>::full(std::vector<std::size_t> shape, S value) {
  auto n = std::make_shared<detail::NodeT<S>>();
  n->data.assign(shape_numel(shape), value);
  n->shape = std::move(shape);
  return TensorT(std::move(n));
}

template <typename S>
TensorT<S> TensorT<S>::from_data(std::vector<std::size_t> shape,
                                 std::vector<S> data) {
  if (shape_numel(shape) != data.size())
    throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  auto n = std::make_shared<detail::NodeT<S>>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  return TensorT(std::move(n));
}

template <typename S>
TensorT<S> TensorT<S>::scalar(S value) {
  return full({1}, value);
}

template <typename S>
TensorT<S> TensorT<S>::randn(std::vector<std::size_t> shape, Rng& rng,
                             S std_dev) {
  TensorT t = zeros(std::move(shape));
  for (S& v : t.data()) v = static_cast<S>(rng.normal()) * std_dev;
  return t;
}

template <typename S>
TensorT<S> TensorT<S>::trunc_normal(std::vector<std::size_t> shape, Rng& rng,
                                    S std_dev) {
  TensorT t = zeros(std::move(shape));
  for (S& v : t.data())
    v = static_cast<S>(rng.trunc_normal(static_cast<double>(std_dev)));
  return t;
}

template <typename S>
const std::vector<std::size_t>& TensorT<S>::shape() const {
  return ref().shape;
}

template <typename S>
std::size_t TensorT<S>::size() const {
  return ref().data.size();
}

template <typename S>
std::size_t TensorT<S>::rows() const {
  if (ndim() != 2)
    throw ContractError("tensor: rows() on non-matrix " + shape_str(shape()));
  return shape()[0];
}

template <typename S>
std::size_t TensorT<S>::cols() const {
  if (ndim() != 2)
    throw ContractError("tensor: cols() on non-matrix " + shape_str(shape()));
  return shape()[1];
}

template <typename S>
std::vector<S>& TensorT<S>::data() {
  return ref().data;
}

template <typename S>
const std::vector<S>& TensorT<S>::data() const {
  return ref().data;
}

template <typename S>
S TensorT<S>::item() const {
  if (size() != 1)
    throw ContractError("tensor: item() on non-scalar " + shape_str(shape()));
  return ref().data[0];
}

template <typename S>
S TensorT<S>::at(std::size_t r, std::size_t c) const {
  return ref().data[r * cols() + c];
}

template <typename S>
S& TensorT<S>::at(std::size_t r, std::size_t c) {
  return ref().data[r * cols() + c];
}

template <typename S>
bool TensorT<S>::requires_grad() const {
  return ref().requires_grad;
}

template <typename S>
TensorT<S>& TensorT<S>::set_requires_grad(bool v) {
  ref().requires_grad = v;
  return *this;
}

template <typename S>
bool TensorT<S>::has_grad() const {
  return ref().grad != nullptr;
}

template <typename S>
std::vector<S>& TensorT<S>::grad() {
  return ref().ensure_grad();
}

template <typename S>
const std::vector<S>* TensorT<S>::grad_if() const {
  return ref().grad.get();
}

template <typename S>
void TensorT<S>::zero_grad() {
  auto& n = ref();
  if (n.grad) std::fill(n.grad->begin(), n.grad->end(), S(0));
}

template <typename S>
TensorT<S> TensorT<S>::grad_tensor() const {
  const auto& n = ref();
  if (!n.grad) throw ContractError("tensor: gradient not computed");
  return from_data(n.shape, *n.grad);
}

template <typename S>
TensorT<S> TensorT<S>::clone() const {
  const auto& n = ref();
  TensorT t = from_data(n.shape, n.data);
  t.set_requires_grad(n.requires_grad);
  return t;
}

template <typename S>
bool TensorT<S>::all_finite() const {
  for (S v : ref().data)
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename S>
bool bitwise_equal(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(S)) == 0;
}

// ---------------------------------------------------------------------------
// Tape

template <typename S>
void TapeT<S>::record(const char* op_name,
                      std::shared_ptr<detail::NodeT<S>> out,
                      std::function<void()> apply) {
  if (spent_)
    throw ContractError("tape: recording onto a consumed tape");
  records_.push_back({op_name, std::move(out), std::move(apply)});
}

template <typename S>
void TapeT<S>::backward(const TensorT<S>& loss) {
  if (spent_) throw ContractError("tape: backward on a consumed tape");
  if (records_.empty()) throw ContractError("tape: backward on an empty tape");
  if (loss.size() != 1)
    throw ContractError("tape: backward requires a scalar loss, got " +
                        shape_str(loss.shape()));
  if (!loss.requires_grad())
    throw ContractError(
        "tape: loss does not depend on any recorded operation");

  loss.node()->ensure_grad()[0] += S(1);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    // Records whose output never received a gradient are not on any path
    // from the loss; skip them so unrelated tensors stay untouched.
    if (it->out->grad) it->apply();
  }
  records_.clear();
  spent_ = true;
}

// ---------------------------------------------------------------------------
// Ambient tape

namespace {
template <typename S>
TapeT<S>*& tape_slot() {
  thread_local TapeT<S>* slot = nullptr;
  return slot;
}
}  // namespace

template <typename S>
TapeT<S>* active_tape() {
  return tape_slot<S>();
}

template <typename S>
TapeScopeT<S>::TapeScopeT(TapeT<S>& tape) {
  prev_ = tape_slot<S>();
  tape_slot<S>() = &tape;
}

template <typename S>
TapeScopeT<S>::~TapeScopeT() {
  tape_slot<S>() = prev_;
}

template <typename S>
NoTapeScopeT<S>::NoTapeScopeT() {
  prev_ = tape_slot<S>();
  tape_slot<S>() = nullptr;
}

template <typename S>
NoTapeScopeT<S>::~NoTapeScopeT() {
  tape_slot<S>() = prev_;
}

#define SDAE_INSTANTIATE_TENSOR(S)                                  \
  template class TensorT<S>;                                        \
  template class TapeT<S>;                                          \
  template class TapeScopeT<S>;                                     \
  template class NoTapeScopeT<S>;                                   \
  template TapeT<S>* active_tape<S>();                              \
  template bool bitwise_equal<S>(const TensorT<S>&, const TensorT<S>&);

SDAE_INSTANTIATE_TENSOR(float)
SDAE_INSTANTIATE_TENSOR(double)

}  // namespace sdae
