#pragma once

#include "t2/nn/params.hpp"

namespace t2 {

// Plain SGD with Nesterov-free momentum and L2 weight decay:
//   v <- momentum * v + (g + decay * w)
//   w <- w - lr * v
// Decay is skipped for params flagged decay = false (biases, BN affine).
template <class T>
class Sgd {
 public:
  Sgd(ParamSet<T>& params, T lr, T momentum, T weight_decay)
      : params_(&params), lr_(lr), momentum_(momentum), decay_(weight_decay) {}

  void step(T lr_scale = static_cast<T>(1)) {
    const T lr = lr_ * lr_scale;
    for (auto* p : params_->items) {
      auto g = p->grad.m.array();
      if (p->decay && decay_ != static_cast<T>(0))
        p->momentum.m.array() =
            momentum_ * p->momentum.m.array() + g + decay_ * p->value.m.array();
      else
        p->momentum.m.array() = momentum_ * p->momentum.m.array() + g;
      p->value.m.array() -= lr * p->momentum.m.array();
    }
  }

  T base_lr() const { return lr_; }
  void set_base_lr(T lr) { lr_ = lr; }

 private:
  ParamSet<T>* params_;
  T lr_;
  T momentum_;
  T decay_;
};

// Linear ramp from lr/warmup_steps up to lr over the first warmup_steps
// optimizer steps, constant afterwards. Returned as a multiplier.
template <class T>
T warmup_scale(long step, long warmup_steps) {
  if (warmup_steps <= 0 || step >= warmup_steps) return static_cast<T>(1);
  return static_cast<T>(step + 1) / static_cast<T>(warmup_steps);
}

}  // namespace t2
