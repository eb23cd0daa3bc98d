#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdn/layers.hpp"

namespace mdn {

// Input/output shape of one executed layer, recorded on request by forward passes.
struct ShapeRecord {
  std::string layer;
  Shape input;
  Shape output;
};
using ShapeTrace = std::vector<ShapeRecord>;

// Convolutional residual classifier over 32x32 RGB crops.
//
//   conv1 3->64 | maxpool | conv2_1 64->128, conv2_2 128->128 (+ skip from pool1) | maxpool
//   conv3_1 128->256, conv3_2, conv3_3 256->256 (+ skip from pool2) | fc 16384->1024->1024->K
//
// Every conv is 3x3 "same" followed by batch norm; skips carry a learned 1x1
// projection to match channel counts.
struct CrnSpec {
  Index num_classes = 43;

  static constexpr Index kInputSize = 32;
  static constexpr Index kInputChannels = 3;
  static constexpr Index kConv1Channels = 64;
  static constexpr Index kConv2Channels = 128;
  static constexpr Index kConv3Channels = 256;
  static constexpr Index kFcWidth = 1024;
};

template <typename T>
class BasicCrn {
 public:
  BasicCrn(const CrnSpec& spec, std::uint64_t seed);

  const CrnSpec& spec() const { return spec_; }

  // batch is N x 3 x 32 x 32; returns pre-softmax logits N x num_classes.
  BasicTensor<T> forward(const BasicTensor<T>& batch, Mode mode,
                         ShapeTrace* trace = nullptr) const;

  // Named tensors in a fixed order: trainable weights and batch-norm buffers.
  ParameterSet<T> parameters() const;
  Index parameter_count() const { return mdn::parameter_count(parameters()); }

  // Test hook: with skips off the residual additions are dropped.
  void set_skips_enabled(bool on) { skips_enabled_ = on; }

  ConvBn<T> conv1;
  ConvBn<T> conv2_1;
  ConvBn<T> conv2_2;
  ConvBn<T> conv3_1;
  ConvBn<T> conv3_2;
  ConvBn<T> conv3_3;
  Conv2d<T> skip1;
  Conv2d<T> skip2;
  Linear<T> fc1;
  Linear<T> fc2;
  Linear<T> fc3;

 private:
  CrnSpec spec_;
  bool skips_enabled_ = true;
};

using Crn = BasicCrn<float>;

struct Classification {
  int class_id = 0;
  float probability = 0.0f;
};

// Argmax of softmax(logits); ties resolve to the lowest class id.
Classification classify_logits(std::span<const float> logits);

// Eval-mode readout for one 3 x 32 x 32 image.
Classification classify(const Crn& model, const Tensor& image);

}  // namespace mdn
