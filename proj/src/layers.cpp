#include "mdn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace mdn {

template <typename T>
Index parameter_count(const ParameterSet<T>& params) {
  Index total = 0;
  for (const auto& p : params) {
    if (p.trainable) total += p.tensor.numel();
  }
  return total;
}

template <typename T>
void Initializer::kaiming(BasicTensor<T>& weight, Index fan_in) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (T& w : weight.data()) w = static_cast<T>(dist(rng_));
}

template <typename T>
Conv2d<T>::Conv2d(Index in_channels, Index out_channels, Index kernel, Index stride_,
                  Index padding_, bool with_bias, Initializer& init)
    : stride(stride_), padding(padding_) {
  params.weight = BasicTensor<T>(Shape{out_channels, in_channels, kernel, kernel});
  init.kaiming(params.weight, in_channels * kernel * kernel);
  params.weight.set_requires_grad(true);
  if (with_bias) {
    params.bias = BasicTensor<T>(Shape{out_channels});
    params.bias.set_requires_grad(true);
  }
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, ParameterSet<T>& out) const {
  out.push_back({prefix + ".weight", params.weight, true});
  if (params.bias.defined()) out.push_back({prefix + ".bias", params.bias, true});
}

template <typename T>
Deconv2d<T>::Deconv2d(Index in_channels, Index out_channels, Index kernel, Index stride_,
                      Index padding_, bool with_bias, Initializer& init)
    : stride(stride_), padding(padding_) {
  params.weight = BasicTensor<T>(Shape{in_channels, out_channels, kernel, kernel});
  // Each output pixel sees about in_channels * (kernel / stride)^2 inputs.
  const Index taps = std::max<Index>(1, (kernel * kernel) / (stride * stride));
  init.kaiming(params.weight, in_channels * taps);
  params.weight.set_requires_grad(true);
  if (with_bias) {
    params.bias = BasicTensor<T>(Shape{out_channels});
    params.bias.set_requires_grad(true);
  }
}

template <typename T>
void Deconv2d<T>::collect(const std::string& prefix, ParameterSet<T>& out) const {
  out.push_back({prefix + ".weight", params.weight, true});
  if (params.bias.defined()) out.push_back({prefix + ".bias", params.bias, true});
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(Index channels) {
  params.gamma = BasicTensor<T>(Shape{channels}, T(1));
  params.beta = BasicTensor<T>(Shape{channels}, T(0));
  params.running_mean = BasicTensor<T>(Shape{channels}, T(0));
  params.running_var = BasicTensor<T>(Shape{channels}, T(1));
  params.gamma.set_requires_grad(true);
  params.beta.set_requires_grad(true);
}

template <typename T>
void BatchNorm2d<T>::collect(const std::string& prefix, ParameterSet<T>& out) const {
  out.push_back({prefix + ".gamma", params.gamma, true});
  out.push_back({prefix + ".beta", params.beta, true});
  out.push_back({prefix + ".running_mean", params.running_mean, false});
  out.push_back({prefix + ".running_var", params.running_var, false});
}

template <typename T>
Linear<T>::Linear(Index in_features, Index out_features, Initializer& init) {
  params.weight = BasicTensor<T>(Shape{out_features, in_features});
  init.kaiming(params.weight, in_features);
  params.weight.set_requires_grad(true);
  params.bias = BasicTensor<T>(Shape{out_features});
  params.bias.set_requires_grad(true);
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, ParameterSet<T>& out) const {
  out.push_back({prefix + ".weight", params.weight, true});
  out.push_back({prefix + ".bias", params.bias, true});
}

template <typename T>
ConvBn<T>::ConvBn(Index in_channels, Index out_channels, Index kernel, Index stride,
                  Index padding, Initializer& init)
    : conv(in_channels, out_channels, kernel, stride, padding, false, init), bn(out_channels) {}

template <typename T>
BasicTensor<T> ConvBn<T>::forward(const BasicTensor<T>& x, Mode mode, bool activate) const {
  auto y = bn(conv(x), mode);
  return activate ? relu(y) : y;
}

template <typename T>
void ConvBn<T>::collect(const std::string& prefix, ParameterSet<T>& out) const {
  conv.collect(prefix + ".conv", out);
  bn.collect(prefix + ".bn", out);
}

template Index parameter_count(const ParameterSet<float>&);
template Index parameter_count(const ParameterSet<double>&);
template void Initializer::kaiming(BasicTensor<float>&, Index);
template void Initializer::kaiming(BasicTensor<double>&, Index);
template struct Conv2d<float>;
template struct Conv2d<double>;
template struct Deconv2d<float>;
template struct Deconv2d<double>;
template struct BatchNorm2d<float>;
template struct BatchNorm2d<double>;
template struct Linear<float>;
template struct Linear<double>;
template struct ConvBn<float>;
template struct ConvBn<double>;

}  // namespace mdn
