#include "mdn/optim.hpp"

#include <string>

#include "mdn/error.hpp"

namespace mdn {

template <typename T>
void sgd_update(std::span<T> param, std::span<const T> grad, std::span<T> velocity, T lr,
                T momentum, T weight_decay) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw DimensionError("sgd_update: param/grad/velocity lengths " +
                         std::to_string(param.size()) + "/" + std::to_string(grad.size()) + "/" +
                         std::to_string(velocity.size()) + " differ");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * param[i];
    param[i] -= lr * velocity[i];
  }
}

template <typename T>
SgdMomentum<T>::SgdMomentum(T lr, T momentum, T weight_decay)
    : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
  // lr == 0 is accepted as a frozen run.
  if (!(lr >= T(0))) throw ContractError("sgd: lr must be >= 0");
  if (momentum < T(0) || momentum >= T(1)) throw ContractError("sgd: momentum must be in [0, 1)");
}

template <typename T>
void SgdMomentum<T>::step(ParameterSet<T>& params) {
  if (velocity_.empty()) {
    velocity_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].trainable) velocity_[i].assign(params[i].tensor.data().size(), T(0));
    }
  }
  if (velocity_.size() != params.size()) {
    throw ContractError("sgd: parameter set changed size between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable) continue;
    const bool decays = p.name.ends_with(".weight");
    const T decay = decays ? weight_decay_ : T(0);
    if (!p.tensor.has_grad()) {
      // Momentum still decays into the parameter.
      std::vector<T> zeros(p.tensor.data().size(), T(0));
      sgd_update<T>(p.tensor.data(), zeros, velocity_[i], lr_, momentum_, decay);
      continue;
    }
    sgd_update<T>(p.tensor.data(), p.tensor.grad(), velocity_[i], lr_, momentum_, decay);
    p.tensor.zero_grad();
  }
}

template <typename T>
void SgdMomentum<T>::zero_grad(ParameterSet<T>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

template void sgd_update(std::span<float>, std::span<const float>, std::span<float>, float, float,
                         float);
template void sgd_update(std::span<double>, std::span<const double>, std::span<double>, double,
                         double, double);
template class SgdMomentum<float>;
template class SgdMomentum<double>;

}  // namespace mdn
