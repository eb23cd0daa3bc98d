#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mdn/ops.hpp"

namespace mdn {

// A named tensor owned by a model. Buffers (batch-norm running statistics)
// are archived but never updated by the optimizer.
template <typename T>
struct NamedTensor {
  std::string name;
  BasicTensor<T> tensor;
  bool trainable = true;
};

template <typename T>
using ParameterSet = std::vector<NamedTensor<T>>;

template <typename T>
Index parameter_count(const ParameterSet<T>& params);

// Kaiming-normal fan-in initialization source shared by all layers of a model.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  template <typename T>
  void kaiming(BasicTensor<T>& weight, Index fan_in);

 private:
  std::mt19937_64 rng_;
};

template <typename T>
struct Conv2d {
  LayerParams<T> params;
  Index stride = 1;
  Index padding = 0;

  Conv2d() = default;
  Conv2d(Index in_channels, Index out_channels, Index kernel, Index stride, Index padding,
         bool with_bias, Initializer& init);

  Index in_channels() const { return params.weight.dim(1); }
  Index out_channels() const { return params.weight.dim(0); }
  BasicTensor<T> operator()(const BasicTensor<T>& x) const {
    return conv2d(x, params, stride, padding);
  }
  void collect(const std::string& prefix, ParameterSet<T>& out) const;
};

// Transposed 3x3 (or k x k) convolution; weight is InC x OutC x k x k.
template <typename T>
struct Deconv2d {
  LayerParams<T> params;
  Index stride = 2;
  Index padding = 1;

  Deconv2d() = default;
  Deconv2d(Index in_channels, Index out_channels, Index kernel, Index stride, Index padding,
           bool with_bias, Initializer& init);

  Index in_channels() const { return params.weight.dim(0); }
  Index out_channels() const { return params.weight.dim(1); }
  BasicTensor<T> operator()(const BasicTensor<T>& x, Index output_padding) const {
    return transposed_conv2d(x, params, stride, padding, output_padding);
  }
  void collect(const std::string& prefix, ParameterSet<T>& out) const;
};

template <typename T>
struct BatchNorm2d {
  mutable BatchNormParams<T> params;
  T momentum = T(0.1);

  BatchNorm2d() = default;
  explicit BatchNorm2d(Index channels);

  BasicTensor<T> operator()(const BasicTensor<T>& x, Mode mode) const {
    return batchnorm(x, params, mode, momentum);
  }
  void collect(const std::string& prefix, ParameterSet<T>& out) const;
};

template <typename T>
struct Linear {
  LayerParams<T> params;

  Linear() = default;
  Linear(Index in_features, Index out_features, Initializer& init);

  Index out_features() const { return params.weight.dim(0); }
  BasicTensor<T> operator()(const BasicTensor<T>& x) const { return fully_connected(x, params); }
  void collect(const std::string& prefix, ParameterSet<T>& out) const;
};

// conv -> batch norm -> (optional) relu, the unit every trunk layer uses.
template <typename T>
struct ConvBn {
  Conv2d<T> conv;
  BatchNorm2d<T> bn;

  ConvBn() = default;
  ConvBn(Index in_channels, Index out_channels, Index kernel, Index stride, Index padding,
         Initializer& init);

  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode, bool activate = true) const;
  void collect(const std::string& prefix, ParameterSet<T>& out) const;
};

}  // namespace mdn
