#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sdae/common.hpp"
#include "sdae/rng.hpp"

namespace sdae {

namespace detail {

template <typename S>
struct NodeT {
  std::vector<std::size_t> shape;
  std::vector<S> data;
  std::unique_ptr<std::vector<S>> grad;  // lazily allocated, shape of data
  bool requires_grad = false;

  std::vector<S>& ensure_grad() {
    if (!grad) grad = std::make_unique<std::vector<S>>(data.size(), S(0));
    return *grad;
  }
};

}  // namespace detail

// Dense row-major tensor. Value-semantic handle to shared storage; copies
// alias, clone() deep-copies. Gradients live next to the data and are filled
// by TapeT::backward.
template <typename S>
class TensorT {
 public:
  using Scalar = S;

  TensorT() = default;

  static TensorT zeros(std::vector<std::size_t> shape);
  static TensorT full(std::vector<std::size_t> shape, S value);
  static TensorT from_data(std::vector<std::size_t> shape,
                           std::vector<S> data);
  static TensorT scalar(S value);
  static TensorT randn(std::vector<std::size_t> shape, Rng& rng, S std_dev);
  // Normal clipped to two standard deviations; the usual ViT weight init.
  static TensorT trunc_normal(std::vector<std::size_t> shape, Rng& rng,
                              S std_dev);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t size() const;
  // 2-D accessors; throw ContractError on other ranks.
  std::size_t rows() const;
  std::size_t cols() const;

  std::vector<S>& data();
  const std::vector<S>& data() const;
  S* ptr() { return data().data(); }
  const S* ptr() const { return data().data(); }

  S item() const;
  S at(std::size_t r, std::size_t c) const;
  S& at(std::size_t r, std::size_t c);

  bool requires_grad() const;
  TensorT& set_requires_grad(bool v);

  bool has_grad() const;
  std::vector<S>& grad();
  const std::vector<S>* grad_if() const;
  void zero_grad();
  TensorT grad_tensor() const;

  TensorT clone() const;
  bool all_finite() const;

  std::shared_ptr<detail::NodeT<S>> node() const { return node_; }

 private:
  explicit TensorT(std::shared_ptr<detail::NodeT<S>> n) : node_(std::move(n)) {}
  detail::NodeT<S>& ref() const;

  std::shared_ptr<detail::NodeT<S>> node_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <typename S>
bool bitwise_equal(const TensorT<S>& a, const TensorT<S>& b);

// Recording of one forward pass: ops append themselves in execution order,
// which is a topological order by construction. backward() runs the records
// once, in reverse, then clears the tape; a second backward is an error.
template <typename S>
class TapeT {
 public:
  TapeT() = default;
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  void record(const char* op_name, std::shared_ptr<detail::NodeT<S>> out,
              std::function<void()> apply);
  void backward(const TensorT<S>& loss);

  std::size_t size() const { return records_.size(); }
  bool spent() const { return spent_; }

 private:
  struct Record {
    const char* name;
    std::shared_ptr<detail::NodeT<S>> out;
    std::function<void()> apply;
  };
  std::vector<Record> records_;
  bool spent_ = false;
};

using Tape = TapeT<float>;
using TapeD = TapeT<double>;

// Ambient per-thread recording target. Ops record iff a tape is active and
// an input participates in differentiation.
template <typename S>
TapeT<S>* active_tape();

template <typename S>
class TapeScopeT {
 public:
  explicit TapeScopeT(TapeT<S>& tape);
  ~TapeScopeT();
  TapeScopeT(const TapeScopeT&) = delete;
  TapeScopeT& operator=(const TapeScopeT&) = delete;

 private:
  TapeT<S>* prev_;
};

// Suppresses recording (teacher branch, evaluation).
template <typename S>
class NoTapeScopeT {
 public:
  NoTapeScopeT();
  ~NoTapeScopeT();
  NoTapeScopeT(const NoTapeScopeT&) = delete;
  NoTapeScopeT& operator=(const NoTapeScopeT&) = delete;

 private:
  TapeT<S>* prev_;
};

using TapeScope = TapeScopeT<float>;
using NoTapeScope = NoTapeScopeT<float>;

}  // namespace sdae
