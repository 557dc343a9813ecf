#pragma once

#include "sdae/params.hpp"
#include "sdae/tensor.hpp"

namespace sdae {

template <typename S>
struct AdamWConfigT {
  S beta1 = S(0.9);
  S beta2 = S(0.999);
  S eps = S(1e-8);
  S weight_decay = S(0.05);
};

using AdamWConfig = AdamWConfigT<float>;

// Decoupled AdamW over a fixed parameter list:
//   p <- p - lr*wd*p - lr*mhat/(sqrt(vhat) + eps)
// The learning rate is supplied per step so schedules stay outside.
template <typename S>
class AdamWT {
 public:
  AdamWT(NamedParamsT<S>& params, AdamWConfigT<S> cfg);

  // Missing gradients count as zero (the decay still applies). Throws
  // TrainingError naming the parameter if a gradient is non-finite.
  void step(S lr);
  void zero_grad();

  long long step_count() const { return step_; }
  void set_step_count(long long s) { step_ = s; }
  const AdamWConfigT<S>& config() const { return cfg_; }

  // Moment buffers, exposed for checkpointing as "opt.m."/"opt.v." entries.
  NamedParamsT<S> state_tensors() const;
  void load_state_tensors(const NamedParamsT<S>& state);

 private:
  struct Slot {
    std::string name;
    TensorT<S> param;
    TensorT<S> m;
    TensorT<S> v;
  };
  std::vector<Slot> slots_;
  AdamWConfigT<S> cfg_;
  long long step_ = 0;
};

using AdamW = AdamWT<float>;

}  // namespace sdae
