#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sdae/tensor.hpp"

namespace sdae {

// Ordered name -> tensor mapping. Order is construction order and is part of
// the determinism contract (optimizer updates and checkpoints follow it).
template <typename S>
class NamedParamsT {
 public:
  void add(std::string name, TensorT<S> t) {
    if (find(name))
      throw ContractError("params: duplicate name '" + name + "'");
    items_.emplace_back(std::move(name), std::move(t));
  }

  TensorT<S>* find(const std::string& name) {
    for (auto& [n, t] : items_)
      if (n == name) return &t;
    return nullptr;
  }

  const TensorT<S>* find(const std::string& name) const {
    for (auto& [n, t] : items_)
      if (n == name) return &t;
    return nullptr;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t.size();
    return n;
  }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  std::pair<std::string, TensorT<S>>& operator[](std::size_t i) {
    return items_[i];
  }
  const std::pair<std::string, TensorT<S>>& operator[](std::size_t i) const {
    return items_[i];
  }

 private:
  std::vector<std::pair<std::string, TensorT<S>>> items_;
};

using NamedParams = NamedParamsT<float>;

}  // namespace sdae
