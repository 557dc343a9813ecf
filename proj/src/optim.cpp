#include "sdae/optim.hpp"

#include <cmath>

#include "sdae/kernels.hpp"

namespace sdae {

template <typename S>
AdamWT<S>::AdamWT(NamedParamsT<S>& params, AdamWConfigT<S> cfg)
    : cfg_(cfg) {
  for (auto& [name, t] : params) {
    Slot s;
    s.name = name;
    s.param = t;
    s.m = TensorT<S>::zeros(t.shape());
    s.v = TensorT<S>::zeros(t.shape());
    slots_.push_back(std::move(s));
  }
}

template <typename S>
void AdamWT<S>::step(S lr) {
  if (lr < S(0)) throw ContractError("adamw: negative learning rate");
  ++step_;
  for (auto& s : slots_) {
    const std::vector<S>& g = s.param.grad();
    for (S v : g)
      if (!std::isfinite(v))
        throw TrainingError("adamw: non-finite gradient in parameter '" +
                            s.name + "'");
    kernels::adamw(s.param.ptr(), g.data(), s.m.ptr(), s.v.ptr(),
                   s.param.size(), lr, cfg_.beta1, cfg_.beta2, cfg_.eps,
                   cfg_.weight_decay, step_);
  }
}

template <typename S>
void AdamWT<S>::zero_grad() {
  for (auto& s : slots_) s.param.zero_grad();
}

template <typename S>
NamedParamsT<S> AdamWT<S>::state_tensors() const {
  NamedParamsT<S> out;
  for (const auto& s : slots_) {
    out.add("opt.m." + s.name, s.m);
    out.add("opt.v." + s.name, s.v);
  }
  return out;
}

template <typename S>
void AdamWT<S>::load_state_tensors(const NamedParamsT<S>& state) {
  for (auto& s : slots_) {
    for (const char* kind : {"m", "v"}) {
      const std::string key = std::string("opt.") + kind + "." + s.name;
      const TensorT<S>* t = state.find(key);
      if (!t) throw FormatError("optimizer state: missing tensor '" + key + "'");
      TensorT<S>& dst = kind[0] == 'm' ? s.m : s.v;
      if (t->shape() != dst.shape())
        throw FormatError("optimizer state: shape mismatch for '" + key +
                          "': " + shape_str(t->shape()) + " vs " +
                          shape_str(dst.shape()));
      dst.data() = t->data();
    }
  }
}

template class AdamWT<float>;
template class AdamWT<double>;

}  // namespace sdae
