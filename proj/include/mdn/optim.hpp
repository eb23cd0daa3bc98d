#pragma once

#include <span>
#include <vector>

#include "mdn/layers.hpp"

namespace mdn {

// One momentum-SGD update of a single tensor:
//   velocity <- momentum * velocity + grad + weight_decay * param
//   param <- param - lr * velocity
template <typename T>
void sgd_update(std::span<T> param, std::span<const T> grad, std::span<T> velocity, T lr,
                T momentum, T weight_decay = T(0));

// Momentum SGD over a model's trainable tensors. Velocities are keyed by
// position in the parameter set, so the set must keep its order between steps.
// Weight decay applies to tensors named "*.weight" only.
template <typename T>
class SgdMomentum {
 public:
  SgdMomentum(T lr, T momentum, T weight_decay = T(0));

  T lr() const { return lr_; }
  T momentum() const { return momentum_; }
  T weight_decay() const { return weight_decay_; }

  // Applies grads, then clears them. Tensors without a grad count as zero grad.
  void step(ParameterSet<T>& params);
  static void zero_grad(ParameterSet<T>& params);

 private:
  T lr_;
  T momentum_;
  T weight_decay_;
  std::vector<std::vector<T>> velocity_;
};

}  // namespace mdn
