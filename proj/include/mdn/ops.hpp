#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mdn/tensor.hpp"

namespace mdn {

enum class Mode { kTrain, kEval };

// Weights and bias of a convolution, transposed convolution or dense layer.
//   conv2d:            weight OutC x InC x Kh x Kw
//   transposed_conv2d: weight InC x OutC x Kh x Kw (the weight of the conv it is adjoint to)
//   fully_connected:   weight Out x In
// bias is optional (undefined tensor means no bias).
template <typename T>
struct LayerParams {
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

template <typename T>
struct BatchNormParams {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  T epsilon = T(1e-5);
};

Index conv_output_size(Index in, Index kernel, Index stride, Index padding);
Index transposed_output_size(Index in, Index kernel, Index stride, Index padding,
                             Index output_padding);

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const LayerParams<T>& params,
                      Index stride, Index padding);

// Adjoint of conv2d with the same weight and geometry. output_padding picks
// among the output sizes that conv2d would map back onto the input size.
template <typename T>
BasicTensor<T> transposed_conv2d(const BasicTensor<T>& input, const LayerParams<T>& params,
                                 Index stride, Index padding, Index output_padding = 0);

// Window max; backward routes to the first maximum in row-major window order.
template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, Index kernel = 2, Index stride = 2);

// Per-channel normalization over N, H, W. Train mode uses batch statistics and
// folds them into the running estimates (unbiased variance); eval mode reads
// the running estimates.
template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& input, BatchNormParams<T>& params, Mode mode,
                         T momentum = T(0.1));

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& input, T factor);

// Flattens every dimension after the first and applies x * W^T + b.
template <typename T>
BasicTensor<T> fully_connected(const BasicTensor<T>& input, const LayerParams<T>& params);

// Numerically stable softmax along `axis`.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& input, std::size_t axis);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& input, Shape shape);

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& input);

// Mean negative log-likelihood of `labels` under softmax(logits); logits N x C.
template <typename T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels);

// Gathers per-level prediction maps N x (K*width) x H x W into one
// N x A x width tensor, anchors ordered by level, row, column, then box k.
template <typename T>
BasicTensor<T> gather_anchor_rows(const std::vector<BasicTensor<T>>& maps, Index width);

}  // namespace mdn
